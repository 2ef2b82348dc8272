use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{success_reward, EnvError, Observation, StepResult};

pub const OFFICE_WIDTH: usize = 12;
pub const OFFICE_HEIGHT: usize = 9;
pub const OFFICE_ACTIONS: [&str; 4] = ["left", "right", "up", "down"];

const START: (usize, usize) = (2, 1);
const MAIL: (usize, usize) = (7, 4);
const OFFICE: (usize, usize) = (4, 4);
pub(crate) const COFFEE: [(usize, usize); 2] = [(8, 2), (3, 6)];
const DECORATIONS: [(usize, usize); 6] = [(4, 1), (7, 1), (4, 7), (7, 7), (1, 4), (10, 4)];
const NUM_CELLS: usize = OFFICE_WIDTH * OFFICE_HEIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Left,
    Right,
    Up,
    Down,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Left, Move::Right, Move::Up, Move::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Move> {
        Move::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
            Move::Up => (0, 1),
            Move::Down => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Room {
    A,
    B,
    C,
    D,
}

impl Room {
    pub const ALL: [Room; 4] = [Room::A, Room::B, Room::C, Room::D];

    pub fn pos(self) -> (usize, usize) {
        match self {
            Room::A => (1, 1),
            Room::B => (10, 1),
            Room::C => (10, 7),
            Room::D => (1, 7),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Room::A => "a",
            Room::B => "b",
            Room::C => "c",
            Room::D => "d",
        }
    }

    fn at(pos: (usize, usize)) -> Option<Room> {
        Room::ALL.into_iter().find(|r| r.pos() == pos)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OfficeTask {
    #[serde(alias = "deliver_coffee")]
    DeliverCoffee,
    #[default]
    #[serde(alias = "deliver_coffee_and_mail")]
    DeliverCoffeeAndMail,
    #[serde(alias = "PatrolAb", alias = "patrol_ab")]
    PatrolAB,
    #[serde(alias = "PatrolAbc", alias = "patrol_abc")]
    PatrolABC,
}

impl OfficeTask {
    pub fn name(self) -> &'static str {
        match self {
            OfficeTask::DeliverCoffee => "deliver_coffee",
            OfficeTask::DeliverCoffeeAndMail => "deliver_coffee_and_mail",
            OfficeTask::PatrolAB => "patrol_ab",
            OfficeTask::PatrolABC => "patrol_abc",
        }
    }

    /// Rooms to visit in order; empty for delivery tasks.
    pub fn patrol(self) -> &'static [Room] {
        match self {
            OfficeTask::PatrolAB => &[Room::A, Room::B],
            OfficeTask::PatrolABC => &[Room::A, Room::B, Room::C],
            _ => &[],
        }
    }
}

/// Agent position plus task flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OfficeObs {
    pub pos: (usize, usize),
    pub has_coffee: bool,
    pub has_mail: bool,
    /// Indexed by `Room as usize`.
    pub visited: [bool; 4],
    /// Patrol rooms reached in order so far.
    pub progress: u8,
    /// Decoration directly adjacent, indexed by `Move as usize`.
    pub decoration_adjacent: [bool; 4],
}

impl OfficeObs {
    pub const FEATURE_DIM: usize = NUM_CELLS + 2 + 4 + 4 + 4;

    pub fn active_features(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(12);
        out.push((self.pos.1 * OFFICE_WIDTH + self.pos.0) as u32);
        let mut base = NUM_CELLS as u32;
        if self.has_coffee {
            out.push(base);
        }
        if self.has_mail {
            out.push(base + 1);
        }
        base += 2;
        for (i, v) in self.visited.iter().enumerate() {
            if *v {
                out.push(base + i as u32);
            }
        }
        base += 4;
        out.push(base + self.progress.min(3) as u32);
        base += 4;
        for (i, d) in self.decoration_adjacent.iter().enumerate() {
            if *d {
                out.push(base + i as u32);
            }
        }
        out
    }
}

/// The fixed 12-wide, 9-tall office map; y grows upwards.
#[derive(Debug, Clone)]
pub struct OfficeWorld {
    task: OfficeTask,
    max_steps: u32,
    pos: (usize, usize),
    has_coffee: bool,
    has_mail: bool,
    visit_order: Vec<Room>,
    progress: u8,
    last_move: Option<Move>,
    step_count: u32,
    done: bool,
    success: bool,
    failed: bool,
}

impl OfficeWorld {
    pub fn new(task: OfficeTask, max_steps: u32) -> Result<OfficeWorld, EnvError> {
        if max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be positive".into()));
        }
        let mut w = OfficeWorld {
            task,
            max_steps,
            pos: START,
            has_coffee: false,
            has_mail: false,
            visit_order: Vec::new(),
            progress: 0,
            last_move: None,
            step_count: 0,
            done: false,
            success: false,
            failed: false,
        };
        w.reset();
        Ok(w)
    }

    pub fn reset(&mut self) -> Observation {
        self.pos = START;
        self.has_coffee = false;
        self.has_mail = false;
        self.visit_order.clear();
        self.progress = 0;
        self.last_move = None;
        self.step_count = 0;
        self.done = false;
        self.success = false;
        self.failed = false;
        self.enter_cell();
        Observation::Office(self.observe())
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let mv = Move::from_index(action).ok_or(EnvError::InvalidAction {
            domain: "officeworld",
            action,
            count: OFFICE_ACTIONS.len(),
        })?;
        self.step_count += 1;
        self.last_move = Some(mv);
        if let Some(next) = neighbour(self.pos, mv) {
            self.pos = next;
            if is_decoration(next) {
                self.failed = true;
            } else {
                self.enter_cell();
            }
        }
        self.success = !self.failed && self.goal_reached();
        let truncated = !self.success && !self.failed && self.step_count >= self.max_steps;
        self.done = self.success || self.failed || truncated;
        let reward = if self.success {
            success_reward(self.step_count, self.max_steps)
        } else {
            0.0
        };
        Ok(StepResult {
            observation: Observation::Office(self.observe()),
            reward,
            terminal: self.done,
            truncated,
            success: self.success,
        })
    }

    fn enter_cell(&mut self) {
        if COFFEE.contains(&self.pos) {
            self.has_coffee = true;
        }
        if self.pos == MAIL {
            self.has_mail = true;
        }
        if let Some(room) = Room::at(self.pos) {
            if !self.visit_order.contains(&room) {
                self.visit_order.push(room);
            }
            let patrol = self.task.patrol();
            if patrol.get(self.progress as usize) == Some(&room) {
                self.progress += 1;
            }
        }
    }

    fn goal_reached(&self) -> bool {
        match self.task {
            OfficeTask::DeliverCoffee => self.pos == OFFICE && self.has_coffee,
            OfficeTask::DeliverCoffeeAndMail => self.pos == OFFICE && self.has_coffee && self.has_mail,
            OfficeTask::PatrolAB | OfficeTask::PatrolABC => self.progress as usize == self.task.patrol().len(),
        }
    }

    pub fn observe(&self) -> OfficeObs {
        let mut visited = [false; 4];
        for r in &self.visit_order {
            visited[*r as usize] = true;
        }
        let mut decoration_adjacent = [false; 4];
        for m in Move::ALL {
            decoration_adjacent[m.index()] = self.decoration_towards(m);
        }
        OfficeObs {
            pos: self.pos,
            has_coffee: self.has_coffee,
            has_mail: self.has_mail,
            visited,
            progress: self.progress,
            decoration_adjacent,
        }
    }

    /// Whether moving `mv` from the current cell would enter a decoration.
    pub fn decoration_towards(&self, mv: Move) -> bool {
        neighbour(self.pos, mv).is_some_and(is_decoration)
    }

    pub fn task(&self) -> OfficeTask {
        self.task
    }

    pub fn pos(&self) -> (usize, usize) {
        self.pos
    }

    pub fn has_coffee(&self) -> bool {
        self.has_coffee
    }

    pub fn has_mail(&self) -> bool {
        self.has_mail
    }

    pub fn visit_order(&self) -> &[Room] {
        &self.visit_order
    }

    pub fn last_move(&self) -> Option<Move> {
        self.last_move
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn task_success(&self) -> bool {
        self.success
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn coffee_positions() -> [(usize, usize); 2] {
        COFFEE
    }

    pub fn mail_position() -> (usize, usize) {
        MAIL
    }

    pub fn office_position() -> (usize, usize) {
        OFFICE
    }

    pub fn decorations() -> [(usize, usize); 6] {
        DECORATIONS
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for y in (0..OFFICE_HEIGHT).rev() {
            for x in 0..OFFICE_WIDTH {
                let p = (x, y);
                let ch = if p == self.pos {
                    '@'
                } else if is_decoration(p) {
                    '*'
                } else if COFFEE.contains(&p) {
                    'c'
                } else if p == MAIL {
                    'm'
                } else if p == OFFICE {
                    'o'
                } else if let Some(r) = Room::at(p) {
                    r.name().to_ascii_uppercase().chars().next().unwrap()
                } else {
                    '.'
                };
                s.push(ch);
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "step {}/{} coffee={} mail={} visited={:?}",
            self.step_count, self.max_steps, self.has_coffee, self.has_mail, self.visit_order
        );
        s
    }
}

pub fn is_decoration(p: (usize, usize)) -> bool {
    DECORATIONS.contains(&p)
}

/// Whether the map has a wall between `p` and its neighbour in direction `mv`.
fn blocked(p: (usize, usize), mv: Move) -> bool {
    let (x, y) = p;
    match mv {
        Move::Down => {
            // bottom row of each room row, except the vertical openings
            y % 3 == 0 && !(y == 6 && [1, 4, 7, 10].contains(&x)) && !(y == 3 && [1, 10].contains(&x))
        }
        Move::Up => y % 3 == 2 && !(y == 5 && [1, 4, 7, 10].contains(&x)) && !(y == 2 && [1, 10].contains(&x)),
        Move::Left => x % 3 == 0 && !([1, 7].contains(&y) && [3, 6, 9].contains(&x)),
        Move::Right => x % 3 == 2 && !([1, 7].contains(&y) && [2, 5, 8].contains(&x)),
    }
}

/// The cell reached by `mv` from `p`, or `None` if a wall or the border is in the way.
pub fn neighbour(p: (usize, usize), mv: Move) -> Option<(usize, usize)> {
    if blocked(p, mv) {
        return None;
    }
    let (dx, dy) = mv.delta();
    let x = p.0 as i64 + dx;
    let y = p.1 as i64 + dy;
    if x < 0 || y < 0 || x >= OFFICE_WIDTH as i64 || y >= OFFICE_HEIGHT as i64 {
        return None;
    }
    Some((x as usize, y as usize))
}

fn cell_index(p: (usize, usize)) -> usize {
    p.1 * OFFICE_WIDTH + p.0
}

/// For every (from, to) pair, the first move of a shortest path that never
/// enters a decoration (ties broken in `Move::ALL` order).
fn first_move_table() -> &'static Vec<(Option<Move>, Option<u32>)> {
    static TABLE: OnceLock<Vec<(Option<Move>, Option<u32>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = vec![(None, None); NUM_CELLS * NUM_CELLS];
        for ty in 0..OFFICE_HEIGHT {
            for tx in 0..OFFICE_WIDTH {
                let target = (tx, ty);
                let dist = distances_to(target);
                for fy in 0..OFFICE_HEIGHT {
                    for fx in 0..OFFICE_WIDTH {
                        let from = (fx, fy);
                        table[cell_index(from) * NUM_CELLS + cell_index(target)].1 = dist[cell_index(from)];
                        if from == target || dist[cell_index(from)].is_none() {
                            continue;
                        }
                        let best = Move::ALL
                            .into_iter()
                            .filter_map(|m| {
                                let n = neighbour(from, m)?;
                                let d = dist[cell_index(n)]?;
                                (!is_decoration(n) || n == target).then_some((d, m))
                            })
                            .min_by_key(|(d, _)| *d);
                        table[cell_index(from) * NUM_CELLS + cell_index(target)].0 = best.map(|(_, m)| m);
                    }
                }
            }
        }
        table
    })
}

/// Distances to `target` over decoration-free cells (reverse BFS; moves are symmetric).
fn distances_to(target: (usize, usize)) -> Vec<Option<u32>> {
    let mut dist = vec![None; NUM_CELLS];
    dist[cell_index(target)] = Some(0);
    let mut queue = VecDeque::from([target]);
    while let Some(p) = queue.pop_front() {
        let d = dist[cell_index(p)].unwrap();
        for m in Move::ALL {
            if let Some(n) = neighbour(p, m) {
                if is_decoration(n) || dist[cell_index(n)].is_some() {
                    continue;
                }
                dist[cell_index(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// First move of a shortest decoration-avoiding path, or `None` when already there.
pub fn first_move(from: (usize, usize), to: (usize, usize)) -> Option<Move> {
    first_move_table()[cell_index(from) * NUM_CELLS + cell_index(to)].0
}

/// Length of a shortest decoration-avoiding path, `None` when unreachable.
pub fn path_length(from: (usize, usize), to: (usize, usize)) -> Option<u32> {
    first_move_table()[cell_index(from) * NUM_CELLS + cell_index(to)].1
}
