use std::collections::BTreeSet;

use crate::envs::{Domain, GridEnv, OfficeTask};
use crate::logic::{parse_program, precompute_groundings, Atom, EvalStats, FactSet, GroundProgram, Program};

use super::{constant_domain, extract_facts, validate_surjective, ActionMap, ActionVocabulary, BridgeError};

const DOORKEY_POLICY: &str = include_str!("../../policies/doorkey.lp");
const DELIVER_COFFEE_POLICY: &str = include_str!("../../policies/deliver_coffee.lp");
const PATROL_AB_POLICY: &str = include_str!("../../policies/patrol_ab.lp");

/// Source text of the shipped partial policy for a domain (and OfficeWorld task).
/// Delivery tasks use the DeliverCoffee policy and patrol tasks the PatrolAB one.
pub fn builtin_policy(domain: Domain, task: Option<OfficeTask>) -> &'static str {
    match domain {
        Domain::DoorKey => DOORKEY_POLICY,
        Domain::OfficeWorld => match task.unwrap_or_default() {
            OfficeTask::DeliverCoffee | OfficeTask::DeliverCoffeeAndMail => DELIVER_COFFEE_POLICY,
            OfficeTask::PatrolAB | OfficeTask::PatrolABC => PATROL_AB_POLICY,
        },
    }
}

/// Result of one guidance query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Suggestion {
    /// Sorted, distinct action indices.
    pub actions: Vec<usize>,
    /// Action atoms entailed by the policy.
    pub atoms: BTreeSet<Atom>,
    pub stats: EvalStats,
}

/// Partial policy plus the maps needed to query it from an environment state.
#[derive(Debug, Clone)]
pub struct Guidance {
    domain: Domain,
    program: Program,
    ground: Option<GroundProgram>,
    map: ActionMap,
    vocab: ActionVocabulary,
}

impl Guidance {
    /// Fails if some derivable action atom has no mapping.
    pub fn new(domain: Domain, program: Program, map: ActionMap, precompute: bool) -> Result<Guidance, BridgeError> {
        if map.domain() != domain {
            return Err(BridgeError::Config(format!(
                "action map is for {}, not {}",
                map.domain().name(),
                domain.name()
            )));
        }
        let vocab = ActionVocabulary::for_domain(domain);
        let constants = constant_domain(domain);
        validate_surjective(&program, &map, &vocab, &constants).map_err(BridgeError::NotSurjective)?;
        let ground = precompute.then(|| precompute_groundings(&program, &constants));
        Ok(Guidance {
            domain,
            program,
            ground,
            map,
            vocab,
        })
    }

    pub fn builtin(domain: Domain, task: Option<OfficeTask>, precompute: bool) -> Result<Guidance, BridgeError> {
        let program = parse_program(builtin_policy(domain, task))?;
        Guidance::new(domain, program, ActionMap::builtin(domain), precompute)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn action_map(&self) -> &ActionMap {
        &self.map
    }

    pub fn suggest(&self, env: &GridEnv) -> Result<Suggestion, BridgeError> {
        self.suggest_from_facts(&extract_facts(env))
    }

    pub fn suggest_from_facts(&self, facts: &FactSet) -> Result<Suggestion, BridgeError> {
        let (entailed, stats) = match &self.ground {
            Some(g) => g.entailed_with_stats(facts)?,
            None => self.program.entailed_with_stats(facts),
        };
        let atoms: BTreeSet<Atom> = entailed
            .into_iter()
            .filter(|a| self.vocab.is_action(&a.predicate))
            .collect();
        let actions = self.map.actions_from_atoms(&atoms)?;
        Ok(Suggestion { actions, atoms, stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Color, Dir, DoorKeyEnv, OfficeWorld};
    use crate::logic::parse_atom;

    fn facts(atoms: &[&str]) -> FactSet {
        FactSet::try_from(atoms.iter().map(|a| parse_atom(a).unwrap()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn coffee_on_left_suggests_left() {
        let g = Guidance::builtin(Domain::OfficeWorld, Some(OfficeTask::DeliverCoffee), false).unwrap();
        let s = g.suggest_from_facts(&facts(&["coffee(c1)", "on_left(c1)"])).unwrap();
        assert_eq!(s.actions, vec![0]);
        assert_eq!(s.atoms.iter().map(ToString::to_string).collect::<Vec<_>>(), vec!["left"]);
    }

    #[test]
    fn auxiliary_goto_is_entailed_but_not_returned() {
        let g = Guidance::builtin(Domain::OfficeWorld, Some(OfficeTask::DeliverCoffee), false).unwrap();
        let f = facts(&["coffee(c1)", "on_left(c1)"]);
        let all = g.program().entailed_actions(&f);
        assert!(all.contains(&parse_atom("goto(c1)").unwrap()));
        let s = g.suggest_from_facts(&f).unwrap();
        assert!(!s.atoms.iter().any(|a| &*a.predicate == "goto"));
    }

    #[test]
    fn coffee_then_office_after_pickup() {
        // with coffee in hand only the office rule fires
        let g = Guidance::builtin(Domain::OfficeWorld, Some(OfficeTask::DeliverCoffee), false).unwrap();
        let mut f = facts(&["coffee(c1)", "office(o)", "hasCoffee", "on_right(c1)", "straight(o)"]);
        let s = g.suggest_from_facts(&f).unwrap();
        assert_eq!(s.actions, vec![2]);
        f.add("blocked", &["forward"]);
        assert!(g.suggest_from_facts(&f).unwrap().actions.is_empty());
    }

    #[test]
    fn ground_and_lifted_agree_on_doorkey() {
        let lifted = Guidance::builtin(Domain::DoorKey, None, false).unwrap();
        let ground = Guidance::builtin(Domain::DoorKey, None, true).unwrap();
        let mut env = GridEnv::DoorKey(DoorKeyEnv::new(6, 2, 360).unwrap());
        for seed in 0..20 {
            env.reset_with_seed(seed).unwrap();
            for a in [0, 2, 2, 1, 3, 2, 4, 2] {
                let (a_l, a_g) = (lifted.suggest(&env).unwrap(), ground.suggest(&env).unwrap());
                assert_eq!((a_l.actions, a_l.atoms), (a_g.actions, a_g.atoms));
                if env.step(a).unwrap().terminal {
                    break;
                }
            }
        }
    }

    #[test]
    fn doorkey_suggests_pickup_when_facing_key() {
        let g = Guidance::builtin(Domain::DoorKey, None, false).unwrap();
        let env = GridEnv::DoorKey(DoorKeyEnv::from_layout(
            5,
            250,
            2,
            (2, 2, Color::Yellow),
            &[(1, 3, Color::Yellow)],
            (1, 2),
            Dir::SOUTH,
        ));
        let s = g.suggest(&env).unwrap();
        assert_eq!(s.actions, vec![3]);
    }

    #[test]
    fn office_start_patrol_heads_for_room_a() {
        let g = Guidance::builtin(Domain::OfficeWorld, Some(OfficeTask::PatrolABC), false).unwrap();
        let env = GridEnv::Office(OfficeWorld::new(OfficeTask::PatrolABC, 1000).unwrap());
        assert_eq!(g.suggest(&env).unwrap().actions, vec![0]);
    }

    #[test]
    fn mismatched_map_rejected() {
        let program = parse_program(builtin_policy(Domain::DoorKey, None)).unwrap();
        assert!(Guidance::new(Domain::DoorKey, program, ActionMap::builtin(Domain::OfficeWorld), false).is_err());
    }
}
