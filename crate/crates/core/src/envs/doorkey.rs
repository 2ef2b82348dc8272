use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::planner::shortest_plan;
use super::{success_reward, EnvError, Observation, StepResult};

pub const DOORKEY_ACTIONS: [&str; 5] = ["left", "right", "forward", "pickup", "open"];
const LEFT: usize = 0;
const RIGHT: usize = 1;
const FORWARD: usize = 2;
const PICKUP: usize = 3;
const OPEN: usize = 4;

pub const VIEW_SIZE: usize = 7;
const MAX_LAYOUT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }

    fn glyph(self) -> char {
        match self {
            Color::Red => 'r',
            Color::Green => 'g',
            Color::Blue => 'b',
            Color::Purple => 'p',
            Color::Yellow => 'y',
            Color::Grey => 'x',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DoorState {
    Open,
    Closed,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Wall,
    Goal,
    Key(Color),
    Door { color: Color, state: DoorState },
}

impl Cell {
    pub fn passable(self) -> bool {
        matches!(
            self,
            Cell::Empty
                | Cell::Goal
                | Cell::Door {
                    state: DoorState::Open,
                    ..
                }
        )
    }

    fn see_behind(self) -> bool {
        !matches!(
            self,
            Cell::Wall
                | Cell::Door {
                    state: DoorState::Closed | DoorState::Locked,
                    ..
                }
        )
    }

    /// (object, color, state) codes.
    fn encode(self) -> [u8; 3] {
        match self {
            Cell::Empty => [EgoView::OBJ_EMPTY, 0, 0],
            Cell::Wall => [EgoView::OBJ_WALL, Color::Grey.index(), 0],
            Cell::Door { color, state } => {
                let s = match state {
                    DoorState::Open => 0,
                    DoorState::Closed => 1,
                    DoorState::Locked => 2,
                };
                [EgoView::OBJ_DOOR, color.index(), s]
            }
            Cell::Key(color) => [EgoView::OBJ_KEY, color.index(), 0],
            Cell::Goal => [EgoView::OBJ_GOAL, Color::Green.index(), 0],
        }
    }
}

/// Heading; `Dir(0)` is east and values increase clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dir(pub u8);

impl Dir {
    pub const EAST: Dir = Dir(0);
    pub const SOUTH: Dir = Dir(1);
    pub const WEST: Dir = Dir(2);
    pub const NORTH: Dir = Dir(3);

    pub fn vec(self) -> (i64, i64) {
        match self.0 % 4 {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        }
    }

    pub fn turn_left(self) -> Dir {
        Dir((self.0 + 3) % 4)
    }

    pub fn turn_right(self) -> Dir {
        Dir((self.0 + 1) % 4)
    }

    fn glyph(self) -> char {
        ['>', 'v', '<', '^'][self.0 as usize % 4]
    }
}

/// The agent's 7×7 egocentric view: the agent sits at column 3 of the bottom
/// row, looking towards row 0. Cells hidden behind walls or closed doors read
/// as unseen.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EgoView {
    /// Row-major `[row * 7 + col]` (object, color, state) codes.
    pub cells: [[u8; 3]; VIEW_SIZE * VIEW_SIZE],
    pub carrying: Option<Color>,
}

impl EgoView {
    pub const OBJ_UNSEEN: u8 = 0;
    pub const OBJ_EMPTY: u8 = 1;
    pub const OBJ_WALL: u8 = 2;
    pub const OBJ_DOOR: u8 = 3;
    pub const OBJ_KEY: u8 = 4;
    pub const OBJ_GOAL: u8 = 5;
    pub const NUM_OBJECTS: usize = 6;
    pub const NUM_COLORS: usize = 6;
    pub const NUM_STATES: usize = 3;
    const CHANNELS: usize = Self::NUM_OBJECTS + Self::NUM_COLORS + Self::NUM_STATES;
    /// One-hot object/color/state per cell, then the carried key color (or none).
    pub const FEATURE_DIM: usize = VIEW_SIZE * VIEW_SIZE * Self::CHANNELS + 1 + Self::NUM_COLORS;
    pub const AGENT_COL: usize = 3;
    pub const AGENT_ROW: usize = 6;

    pub fn cell(&self, col: usize, row: usize) -> [u8; 3] {
        self.cells[row * VIEW_SIZE + col]
    }

    pub fn active_features(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(VIEW_SIZE * VIEW_SIZE * 3 + 1);
        for (i, [o, c, s]) in self.cells.iter().enumerate() {
            let base = (i * Self::CHANNELS) as u32;
            out.push(base + *o as u32);
            out.push(base + (Self::NUM_OBJECTS as u32) + *c as u32);
            out.push(base + (Self::NUM_OBJECTS + Self::NUM_COLORS) as u32 + *s as u32);
        }
        let inv = (VIEW_SIZE * VIEW_SIZE * Self::CHANNELS) as u32;
        out.push(inv + self.carrying.map_or(0, |c| 1 + c.index() as u32));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoorKeyEnv {
    size: usize,
    num_keys: usize,
    max_steps: u32,
    grid: Vec<Cell>,
    agent: (usize, usize),
    dir: Dir,
    carrying: Option<Color>,
    door: (usize, usize),
    step_count: u32,
    done: bool,
    success: bool,
}

impl DoorKeyEnv {
    pub fn new(size: usize, num_keys: usize, max_steps: u32) -> Result<DoorKeyEnv, EnvError> {
        if size < 5 {
            return Err(EnvError::InvalidConfig(format!("DoorKey grid size must be >= 5, got {size}")));
        }
        if num_keys == 0 || num_keys > Color::ALL.len() {
            return Err(EnvError::InvalidConfig(format!("DoorKey needs 1..=6 keys, got {num_keys}")));
        }
        // widest left room: split at N-3 gives (N-4) columns of (N-2) cells
        let capacity = (size - 4) * (size - 2);
        if num_keys + 1 > capacity {
            return Err(EnvError::InvalidConfig(format!(
                "{num_keys} keys and the agent do not fit in a {size}x{size} DoorKey room"
            )));
        }
        if max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(DoorKeyEnv {
            size,
            num_keys,
            max_steps,
            grid: vec![Cell::Empty; size * size],
            agent: (1, 1),
            dir: Dir::EAST,
            carrying: None,
            door: (2, 1),
            step_count: 0,
            done: true,
            success: false,
        })
    }

    /// Builds an environment from an explicit layout (for tests and replays).
    #[allow(clippy::too_many_arguments)]
    pub fn from_layout(
        size: usize,
        max_steps: u32,
        walls_split: usize,
        door: (usize, usize, Color),
        keys: &[(usize, usize, Color)],
        agent: (usize, usize),
        dir: Dir,
    ) -> DoorKeyEnv {
        let mut env = DoorKeyEnv::new(size, keys.len().max(1), max_steps).expect("valid size");
        env.grid = base_grid(size, walls_split);
        let (dx, dy, dc) = door;
        env.grid[dy * size + dx] = Cell::Door {
            color: dc,
            state: DoorState::Locked,
        };
        env.door = (dx, dy);
        for &(x, y, c) in keys {
            env.grid[y * size + x] = Cell::Key(c);
        }
        env.num_keys = keys.len();
        env.agent = agent;
        env.dir = dir;
        env.done = false;
        env
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Observation, EnvError> {
        for _ in 0..MAX_LAYOUT_ATTEMPTS {
            self.generate(rng);
            if shortest_plan(self).is_some() {
                return Ok(Observation::DoorKey(self.ego_view()));
            }
        }
        Err(EnvError::Unsolvable(MAX_LAYOUT_ATTEMPTS))
    }

    fn generate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.size;
        let split = loop {
            let s = rng.gen_range(2..=n - 3);
            if (s - 1) * (n - 2) > self.num_keys {
                break s;
            }
        };
        self.grid = base_grid(n, split);
        let door_y = rng.gen_range(1..=n - 3);
        let door_color = *Color::ALL.choose(rng).unwrap();
        self.grid[door_y * n + split] = Cell::Door {
            color: door_color,
            state: DoorState::Locked,
        };
        self.door = (split, door_y);

        let mut free: Vec<(usize, usize)> = (1..n - 1)
            .flat_map(|y| (1..split).map(move |x| (x, y)))
            .collect();
        let agent = free.swap_remove(rng.gen_range(0..free.len()));
        self.agent = agent;
        self.dir = Dir(rng.gen_range(0..4));

        let mut others: Vec<Color> = Color::ALL.iter().copied().filter(|c| *c != door_color).collect();
        others.shuffle(rng);
        let colors = std::iter::once(door_color).chain(others.into_iter().take(self.num_keys - 1));
        for color in colors {
            let (x, y) = free.swap_remove(rng.gen_range(0..free.len()));
            self.grid[y * n + x] = Cell::Key(color);
        }
        self.carrying = None;
        self.step_count = 0;
        self.done = false;
        self.success = false;
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        if action >= DOORKEY_ACTIONS.len() {
            return Err(EnvError::InvalidAction {
                domain: "doorkey",
                action,
                count: DOORKEY_ACTIONS.len(),
            });
        }
        self.step_count += 1;
        let front = self.front();
        let front_cell = front.map(|(x, y)| self.cell(x, y));
        match action {
            LEFT => self.dir = self.dir.turn_left(),
            RIGHT => self.dir = self.dir.turn_right(),
            FORWARD => {
                if let (Some(pos), Some(cell)) = (front, front_cell) {
                    if cell.passable() {
                        self.agent = pos;
                        if cell == Cell::Goal {
                            self.success = true;
                        }
                    }
                }
            }
            PICKUP => {
                if let (Some((x, y)), Some(Cell::Key(color))) = (front, front_cell) {
                    if self.carrying.is_none() {
                        self.carrying = Some(color);
                        self.grid[y * self.size + x] = Cell::Empty;
                    }
                }
            }
            OPEN => {
                if let (
                    Some((x, y)),
                    Some(Cell::Door {
                        color,
                        state: DoorState::Locked,
                    }),
                ) = (front, front_cell)
                {
                    if self.carrying == Some(color) {
                        self.grid[y * self.size + x] = Cell::Door {
                            color,
                            state: DoorState::Open,
                        };
                    }
                }
            }
            _ => unreachable!(),
        }
        let truncated = !self.success && self.step_count >= self.max_steps;
        self.done = self.success || truncated;
        let reward = if self.success {
            success_reward(self.step_count, self.max_steps)
        } else {
            0.0
        };
        Ok(StepResult {
            observation: Observation::DoorKey(self.ego_view()),
            reward,
            terminal: self.done,
            truncated,
            success: self.success,
        })
    }

    fn front(&self) -> Option<(usize, usize)> {
        let (dx, dy) = self.dir.vec();
        let x = self.agent.0 as i64 + dx;
        let y = self.agent.1 as i64 + dy;
        self.in_bounds(x, y).then(|| (x as usize, y as usize))
    }

    fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.size && (y as usize) < self.size
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.grid[y * self.size + x]
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_keys(&self) -> usize {
        self.num_keys
    }

    pub fn agent_pos(&self) -> (usize, usize) {
        self.agent
    }

    pub fn agent_dir(&self) -> Dir {
        self.dir
    }

    pub fn carrying(&self) -> Option<Color> {
        self.carrying
    }

    pub fn door_pos(&self) -> (usize, usize) {
        self.door
    }

    pub fn door_color(&self) -> Color {
        match self.cell(self.door.0, self.door.1) {
            Cell::Door { color, .. } => color,
            _ => unreachable!("door cell always holds a door"),
        }
    }

    pub fn door_open(&self) -> bool {
        matches!(
            self.cell(self.door.0, self.door.1),
            Cell::Door {
                state: DoorState::Open,
                ..
            }
        )
    }

    pub fn goal_pos(&self) -> (usize, usize) {
        (self.size - 2, self.size - 2)
    }

    /// Key cells still on the floor.
    pub fn keys(&self) -> Vec<(usize, usize, Color)> {
        let mut out = Vec::new();
        for y in 0..self.size {
            for x in 0..self.size {
                if let Cell::Key(c) = self.cell(x, y) {
                    out.push((x, y, c));
                }
            }
        }
        out
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    /// Drops the step limit; used by the planner so search depth is unbounded.
    pub(crate) fn without_step_limit(&self) -> DoorKeyEnv {
        let mut e = self.clone();
        e.max_steps = u32::MAX;
        e
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn task_success(&self) -> bool {
        self.agent == self.goal_pos()
    }

    /// World coordinates seen at view cell (col, row), if inside the grid.
    pub fn view_to_world(&self, col: usize, row: usize) -> Option<(usize, usize)> {
        let forward = (EgoView::AGENT_ROW - row) as i64;
        let lateral = col as i64 - EgoView::AGENT_COL as i64;
        let (fx, fy) = self.dir.vec();
        let (rx, ry) = self.dir.turn_right().vec();
        let x = self.agent.0 as i64 + forward * fx + lateral * rx;
        let y = self.agent.1 as i64 + forward * fy + lateral * ry;
        self.in_bounds(x, y).then(|| (x as usize, y as usize))
    }

    /// Cells of the egocentric window (outside the grid reads as wall) and
    /// the visibility mask, indexed `[row * 7 + col]`.
    pub fn view_cells(&self) -> ([Cell; VIEW_SIZE * VIEW_SIZE], [bool; VIEW_SIZE * VIEW_SIZE]) {
        let mut cells = [Cell::Wall; VIEW_SIZE * VIEW_SIZE];
        for row in 0..VIEW_SIZE {
            for col in 0..VIEW_SIZE {
                if let Some((x, y)) = self.view_to_world(col, row) {
                    cells[row * VIEW_SIZE + col] = self.cell(x, y);
                }
            }
        }
        cells[EgoView::AGENT_ROW * VIEW_SIZE + EgoView::AGENT_COL] = Cell::Empty;
        let mask = visibility(&cells);
        (cells, mask)
    }

    pub fn ego_view(&self) -> EgoView {
        let (cells, mask) = self.view_cells();
        let mut codes = [[EgoView::OBJ_UNSEEN, 0, 0]; VIEW_SIZE * VIEW_SIZE];
        for i in 0..cells.len() {
            if mask[i] {
                codes[i] = cells[i].encode();
            }
        }
        EgoView {
            cells: codes,
            carrying: self.carrying,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for y in 0..self.size {
            for x in 0..self.size {
                let ch = if (x, y) == self.agent {
                    self.dir.glyph()
                } else {
                    match self.cell(x, y) {
                        Cell::Empty => '.',
                        Cell::Wall => '#',
                        Cell::Goal => 'G',
                        Cell::Key(c) => c.glyph(),
                        Cell::Door {
                            state: DoorState::Open,
                            ..
                        } => '_',
                        Cell::Door { color, .. } => color.glyph().to_ascii_uppercase(),
                    }
                };
                s.push(ch);
            }
            s.push('\n');
        }
        let carrying = self.carrying.map_or("nothing", Color::name);
        let _ = writeln!(s, "step {}/{} carrying {carrying}", self.step_count, self.max_steps);
        s
    }
}

fn base_grid(n: usize, split: usize) -> Vec<Cell> {
    let mut grid = vec![Cell::Empty; n * n];
    for i in 0..n {
        grid[i] = Cell::Wall;
        grid[(n - 1) * n + i] = Cell::Wall;
        grid[i * n] = Cell::Wall;
        grid[i * n + n - 1] = Cell::Wall;
        grid[i * n + split] = Cell::Wall;
    }
    grid[(n - 2) * n + n - 2] = Cell::Goal;
    grid
}

/// Light propagation from the agent cell upwards through the view; walls and
/// closed doors are visible themselves but hide what lies behind them.
fn visibility(cells: &[Cell; VIEW_SIZE * VIEW_SIZE]) -> [bool; VIEW_SIZE * VIEW_SIZE] {
    let w = VIEW_SIZE;
    let idx = |col: usize, row: usize| row * w + col;
    let mut mask = [false; VIEW_SIZE * VIEW_SIZE];
    mask[idx(EgoView::AGENT_COL, EgoView::AGENT_ROW)] = true;
    for row in (0..w).rev() {
        for col in 0..w - 1 {
            if !mask[idx(col, row)] || !cells[idx(col, row)].see_behind() {
                continue;
            }
            mask[idx(col + 1, row)] = true;
            if row > 0 {
                mask[idx(col + 1, row - 1)] = true;
                mask[idx(col, row - 1)] = true;
            }
        }
        for col in (1..w).rev() {
            if !mask[idx(col, row)] || !cells[idx(col, row)].see_behind() {
                continue;
            }
            mask[idx(col - 1, row)] = true;
            if row > 0 {
                mask[idx(col - 1, row - 1)] = true;
                mask[idx(col, row - 1)] = true;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_by_five() -> DoorKeyEnv {
        // agent at (1,1) facing south, key below it, yellow door at (2,2)
        DoorKeyEnv::from_layout(5, 250, 2, (2, 2, Color::Yellow), &[(1, 3, Color::Yellow)], (1, 1), Dir::SOUTH)
    }

    #[test]
    fn scripted_episode_reaches_goal() {
        let mut env = five_by_five();
        // forward to (1,2), pickup key at (1,3), turn left (east), open, forward x2, right, forward
        let actions = [FORWARD, PICKUP, LEFT, OPEN, FORWARD, FORWARD, RIGHT, FORWARD];
        let mut last = None;
        for a in actions {
            last = Some(env.step(a).unwrap());
        }
        let last = last.unwrap();
        assert!(last.success && last.terminal);
        assert_eq!(last.reward, 1.0 - 0.9 * 8.0 / 250.0);
        assert!(matches!(env.step(LEFT), Err(EnvError::EpisodeOver)));
    }

    #[test]
    fn mismatched_key_does_not_open() {
        let mut env =
            DoorKeyEnv::from_layout(5, 250, 2, (2, 2, Color::Yellow), &[(1, 3, Color::Red)], (1, 1), Dir::SOUTH);
        env.step(FORWARD).unwrap();
        env.step(PICKUP).unwrap();
        assert_eq!(env.carrying(), Some(Color::Red));
        env.step(LEFT).unwrap();
        let before = env.clone();
        let r = env.step(OPEN).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!env.door_open());
        assert_eq!(env.agent_pos(), before.agent_pos());
        assert_eq!(env.step_count(), before.step_count() + 1);
    }

    #[test]
    fn pickup_needs_empty_hands() {
        let mut env = DoorKeyEnv::from_layout(
            6,
            360,
            3,
            (3, 2, Color::Blue),
            &[(1, 2, Color::Blue), (1, 4, Color::Red)],
            (1, 3),
            Dir::NORTH,
        );
        env.step(PICKUP).unwrap();
        assert_eq!(env.carrying(), Some(Color::Blue));
        env.step(LEFT).unwrap();
        env.step(LEFT).unwrap();
        env.step(PICKUP).unwrap();
        assert_eq!(env.carrying(), Some(Color::Blue));
        assert_eq!(env.cell(1, 4), Cell::Key(Color::Red));
    }

    #[test]
    fn walls_and_locked_doors_block() {
        let mut env = five_by_five();
        env.step(LEFT).unwrap(); // east, facing the wall at (2,1)
        env.step(FORWARD).unwrap();
        assert_eq!(env.agent_pos(), (1, 1));
    }

    #[test]
    fn timeout_terminates_without_reward() {
        let mut env = DoorKeyEnv::from_layout(5, 3, 2, (2, 2, Color::Yellow), &[(1, 3, Color::Yellow)], (1, 1), Dir::SOUTH);
        env.step(LEFT).unwrap();
        env.step(LEFT).unwrap();
        let r = env.step(LEFT).unwrap();
        assert!(r.terminal && r.truncated && !r.success);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn view_is_egocentric() {
        let env = five_by_five();
        let v = env.ego_view();
        // facing south from (1,1): the key at (1,3) is two cells ahead
        assert_eq!(v.cell(3, 4), [EgoView::OBJ_KEY, Color::Yellow.index(), 0]);
        // east of the agent is on its left when facing south: the wall at (2,1)
        assert_eq!(v.cell(4, 6)[0], EgoView::OBJ_WALL);
        assert_eq!(v.cell(2, 6)[0], EgoView::OBJ_WALL);
        assert_eq!(v.cell(3, 6)[0], EgoView::OBJ_EMPTY);
    }

    #[test]
    fn walls_hide_cells_behind_them() {
        let env = five_by_five();
        let v = env.ego_view();
        // facing south the agent's left is east: col 2 is the wall at x=2, col 1 lies behind it
        assert_eq!(env.view_to_world(1, 6), Some((3, 1)));
        assert_eq!(v.cell(1, 6)[0], EgoView::OBJ_UNSEEN);
    }

    #[test]
    fn invalid_configs() {
        assert!(DoorKeyEnv::new(5, 4, 250).is_err());
        assert!(DoorKeyEnv::new(4, 1, 160).is_err());
        assert!(DoorKeyEnv::new(8, 0, 640).is_err());
    }

    #[test]
    fn feature_vector_has_fixed_popcount() {
        let env = five_by_five();
        let f = env.ego_view().active_features();
        assert_eq!(f.len(), 49 * 3 + 1);
        assert!(f.iter().all(|&i| (i as usize) < EgoView::FEATURE_DIM));
    }
}
