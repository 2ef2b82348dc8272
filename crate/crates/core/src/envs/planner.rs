use std::collections::{HashSet, VecDeque};

use super::doorkey::{Color, Dir, DoorKeyEnv};

type PlanState = ((usize, usize), Dir, Option<Color>, bool);

fn key(env: &DoorKeyEnv) -> PlanState {
    (env.agent_pos(), env.agent_dir(), env.carrying(), env.door_open())
}

/// Shortest action sequence that reaches the goal from the current state,
/// found by breadth-first search over simulated copies of the environment.
///
/// The step limit is ignored. Returns `None` when the goal is unreachable.
pub fn shortest_plan(env: &DoorKeyEnv) -> Option<Vec<usize>> {
    let start = env.without_step_limit();
    if start.task_success() {
        return Some(Vec::new());
    }
    let mut seen: HashSet<PlanState> = HashSet::from([key(&start)]);
    let mut queue = VecDeque::from([(start, Vec::new())]);
    while let Some((state, plan)) = queue.pop_front() {
        for action in 0..5 {
            let mut next = state.clone();
            let Ok(result) = next.step(action) else {
                continue;
            };
            let mut p = plan.clone();
            p.push(action);
            if result.success {
                return Some(p);
            }
            if seen.insert(key(&next)) {
                queue.push_back((next, p));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_replays_to_success() {
        let env = DoorKeyEnv::from_layout(5, 250, 2, (2, 2, Color::Yellow), &[(1, 3, Color::Yellow)], (1, 1), Dir::SOUTH);
        let plan = shortest_plan(&env).unwrap();
        assert_eq!(plan.len(), 8);
        let mut e = env.clone();
        let last = plan.iter().map(|&a| e.step(a).unwrap()).last().unwrap();
        assert!(last.success);
    }

    #[test]
    fn wrong_key_only_is_unsolvable() {
        let env = DoorKeyEnv::from_layout(5, 250, 2, (2, 2, Color::Yellow), &[(1, 3, Color::Red)], (1, 1), Dir::SOUTH);
        assert_eq!(shortest_plan(&env), None);
    }
}
