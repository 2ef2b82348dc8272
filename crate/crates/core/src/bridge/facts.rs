use std::collections::VecDeque;

use crate::envs::{
    first_move, path_length, Cell, Color, DoorKeyEnv, DoorState, GridEnv, Move, OfficeWorld, Room, VIEW_SIZE,
};
use crate::logic::FactSet;

/// Ground facts describing the current state of `env`.
pub fn extract_facts(env: &GridEnv) -> FactSet {
    match env {
        GridEnv::DoorKey(e) => doorkey_facts(e),
        GridEnv::Office(e) => office_facts(e),
    }
}

fn key_name(c: Color) -> String {
    format!("k_{}", c.name())
}

fn door_name(c: Color) -> String {
    format!("d_{}", c.name())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reach {
    /// Stand next to the cell, facing it.
    Face,
    /// Stand on the cell.
    Enter,
}

/// DoorKey facts from what the agent currently sees and carries. Only visible
/// objects (plus the carried key) are named; `unlocked` reflects the door.
pub fn doorkey_facts(env: &DoorKeyEnv) -> FactSet {
    let (cells, mask) = env.view_cells();
    let mut facts = FactSet::new();
    // (constant, color) of every known key or door
    let mut items: Vec<(String, Color)> = Vec::new();
    let mut targets: Vec<(String, usize, Reach)> = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        if !mask[i] {
            continue;
        }
        match *cell {
            Cell::Key(c) => {
                let name = key_name(c);
                facts.add("key", &[&name]);
                items.push((name.clone(), c));
                targets.push((name, i, Reach::Face));
            }
            Cell::Door { color, state } => {
                let name = door_name(color);
                facts.add("door", &[&name]);
                if state != DoorState::Open {
                    facts.add("locked", &[&name]);
                }
                items.push((name.clone(), color));
                targets.push((name, i, Reach::Face));
            }
            Cell::Goal => {
                facts.add("goal", &["g"]);
                targets.push(("g".to_string(), i, Reach::Enter));
            }
            Cell::Empty | Cell::Wall => {}
        }
    }
    match env.carrying() {
        Some(c) => {
            let name = key_name(c);
            facts.add("key", &[&name]);
            facts.add("carrying", &[&name]);
            items.push((name, c));
        }
        None => facts.add("notcarrying", &[]),
    }
    if env.door_open() {
        facts.add("unlocked", &[]);
    }
    for (a, ca) in &items {
        for (b, cb) in &items {
            if a != b && ca == cb {
                facts.add("samecolor", &[a, b]);
            }
        }
    }
    for (name, cell, reach) in targets {
        let fact = match view_first_action(&cells, &mask, cell, reach) {
            Some(Turn::Left) => "on_left",
            Some(Turn::Right) => "on_right",
            Some(Turn::Forward) => "straight",
            None => continue,
        };
        facts.add(fact, &[&name]);
    }
    facts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Turn {
    Left,
    Right,
    Forward,
}

/// View-frame headings: 0 up, 1 right, 2 down, 3 left.
const VIEW_DIRS: [(i64, i64); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// First action of a shortest left/right/forward sequence, moving only over
/// visible passable view cells, that ends facing (or standing on) `target`.
/// `None` if already there or unreachable within the view.
fn view_first_action(
    cells: &[Cell; VIEW_SIZE * VIEW_SIZE],
    mask: &[bool; VIEW_SIZE * VIEW_SIZE],
    target: usize,
    reach: Reach,
) -> Option<Turn> {
    let n = VIEW_SIZE as i64;
    let ahead = |col: i64, row: i64, d: usize| {
        let (dc, dr) = VIEW_DIRS[d];
        let (c, r) = (col + dc, row + dr);
        (c >= 0 && r >= 0 && c < n && r < n).then(|| (r * n + c) as usize)
    };
    let done = |col: i64, row: i64, d: usize| match reach {
        Reach::Face => ahead(col, row, d) == Some(target),
        Reach::Enter => (row * n + col) as usize == target,
    };
    let start = (3i64, 6i64, 0usize);
    if done(start.0, start.1, start.2) {
        return None;
    }
    let mut seen = [false; VIEW_SIZE * VIEW_SIZE * 4];
    let state_id = |c: i64, r: i64, d: usize| ((r * n + c) as usize) * 4 + d;
    seen[state_id(start.0, start.1, start.2)] = true;
    let mut queue = VecDeque::new();
    queue.push_back((start, None::<Turn>));
    while let Some(((col, row, d), first)) = queue.pop_front() {
        for turn in [Turn::Forward, Turn::Left, Turn::Right] {
            let next = match turn {
                Turn::Left => (col, row, (d + 3) % 4),
                Turn::Right => (col, row, (d + 1) % 4),
                Turn::Forward => match ahead(col, row, d) {
                    Some(i) if mask[i] && cells[i].passable() => {
                        ((i as i64) % n, (i as i64) / n, d)
                    }
                    _ => continue,
                },
            };
            let id = state_id(next.0, next.1, next.2);
            if seen[id] {
                continue;
            }
            seen[id] = true;
            let first = first.or(Some(turn));
            if done(next.0, next.1, next.2) {
                return first;
            }
            queue.push_back((next, first));
        }
    }
    None
}

fn move_name(m: Move) -> &'static str {
    match m {
        Move::Left => "left",
        Move::Right => "right",
        Move::Up => "forward",
        Move::Down => "backward",
    }
}

/// OfficeWorld facts. The map is fully known, so every landmark is named and
/// gets a direction from a shortest decoration-free path.
pub fn office_facts(env: &OfficeWorld) -> FactSet {
    let mut facts = FactSet::new();
    // navigation facts only for the nearer coffee machine (c1 on ties)
    let [c1, c2] = OfficeWorld::coffee_positions();
    let far = |p| path_length(env.pos(), p).unwrap_or(u32::MAX);
    let coffee = if far(c2) < far(c1) { ("c2", c2) } else { ("c1", c1) };
    let mut targets = vec![
        coffee,
        ("m", OfficeWorld::mail_position()),
        ("o", OfficeWorld::office_position()),
    ];
    facts.add("coffee", &["c1"]);
    facts.add("coffee", &["c2"]);
    facts.add("mail", &["m"]);
    facts.add("office", &["o"]);
    for r in Room::ALL {
        targets.push((r.name(), r.pos()));
    }
    if env.has_coffee() {
        facts.add("hasCoffee", &[]);
    }
    if env.has_mail() {
        facts.add("hasMail", &[]);
    }
    if env.visit_order().is_empty() {
        facts.add("visited", &["none"]);
    }
    for r in env.visit_order() {
        facts.add("visited", &[r.name()]);
    }
    for (name, pos) in targets {
        let fact = match first_move(env.pos(), pos) {
            Some(Move::Left) => "on_left",
            Some(Move::Right) => "on_right",
            Some(Move::Up) => "straight",
            Some(Move::Down) => "behind",
            None => continue,
        };
        facts.add(fact, &[name]);
    }
    for m in Move::ALL {
        if env.decoration_towards(m) {
            facts.add("blocked", &[move_name(m)]);
        }
    }
    facts
}
