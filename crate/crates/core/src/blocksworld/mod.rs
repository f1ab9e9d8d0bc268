// SPDX-License-Identifier: MIT OR Apache-2.0

//! STRIPS-style BlocksWorld.
//!
//! A [`State`] is a canonical (sorted) set of ground [`Predicate`]s. The
//! four actions follow the usual precondition / add / delete model:
//!
//! | action          | needs                              | adds                              | deletes                        |
//! |-----------------|------------------------------------|-----------------------------------|--------------------------------|
//! | `pick-up x`     | clear x, ontable x, handempty      | holding x                         | clear x, ontable x, handempty  |
//! | `put-down x`    | holding x                          | clear x, ontable x, handempty     | holding x                      |
//! | `stack x y`     | holding x, clear y                 | on x y, clear x, handempty        | holding x, clear y             |
//! | `unstack x y`   | on x y, clear x, handempty         | holding x, clear y                | on x y, clear x, handempty     |
//!
//! Goals are conjunctions of `on` atoms only.

mod generate;
mod json;
mod search;
mod state;

pub use generate::generate_puzzle;
pub use search::{bfs_solve, enumerate_states, MAX_SEARCH_BLOCKS};
pub use state::{Above, Action, Block, Goal, Predicate, State};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest block count supported anywhere in the domain (labels `A`..`F`).
pub const MAX_BLOCKS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("block count {0} outside supported range 1..={MAX_BLOCKS}")]
    BlockCount(usize),
    #[error("block {0} is out of range for a {1}-block puzzle")]
    BlockOutOfRange(Block, usize),
    #[error("a block cannot be on itself ({0})")]
    SelfLoop(Block),
    #[error("ill-formed state: {0}")]
    IllFormed(String),
    #[error("ill-formed goal: {0}")]
    BadGoal(String),
    #[error("cannot parse {kind} from {text:?}")]
    Parse { kind: &'static str, text: String },
    #[error("action {action} is not applicable: {reason}")]
    Inapplicable { action: Action, reason: Reason },
    #[error("search is limited to {MAX_SEARCH_BLOCKS} blocks, got {0}")]
    SizeLimit(usize),
}

/// Why an action's preconditions fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reason {
    BlockOutOfRange { block: Block },
    SameBlock { block: Block },
    HandNotEmpty,
    NotClear { block: Block },
    NotOnTable { block: Block },
    NotOn { top: Block, below: Block },
    NotHolding { block: Block },
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reason::BlockOutOfRange { block } => write!(f, "block {block} does not exist"),
            Reason::SameBlock { block } => write!(f, "both arguments are block {block}"),
            Reason::HandNotEmpty => write!(f, "the hand is not empty"),
            Reason::NotClear { block } => write!(f, "block {block} is not clear"),
            Reason::NotOnTable { block } => write!(f, "block {block} is not on the table"),
            Reason::NotOn { top, below } => write!(f, "block {top} is not on block {below}"),
            Reason::NotHolding { block } => write!(f, "not holding block {block}"),
        }
    }
}

/// An initial state plus an `on`-conjunction goal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Puzzle {
    initial: State,
    goal: Goal,
}

impl Puzzle {
    pub fn new(initial: State, goal: Goal) -> Result<Self, DomainError> {
        for atom in goal.atoms() {
            for b in [atom.top(), atom.below()] {
                if b.index() >= initial.block_count() {
                    return Err(DomainError::BlockOutOfRange(b, initial.block_count()));
                }
            }
        }
        Ok(Self { initial, goal })
    }

    pub fn block_count(&self) -> usize {
        self.initial.block_count()
    }

    pub fn initial(&self) -> &State {
        &self.initial
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    /// The three-block example used by the prompt templates: C sits on A,
    /// B is on the table; the goal is the tower B-A-C.
    pub fn prompt_example() -> Self {
        let (a, b, c) = (Block(0), Block(1), Block(2));
        let initial = State::from_stacks(3, &[vec![a, c], vec![b]], None).expect("example state is well-formed");
        let goal = Goal::new(vec![
            Above::new(a, c).expect("distinct"),
            Above::new(b, a).expect("distinct"),
        ])
        .expect("example goal is acyclic");
        Self { initial, goal }
    }
}

/// The canonical plan for [`Puzzle::prompt_example`].
pub fn prompt_example_plan() -> Plan {
    let (a, b, c) = (Block(0), Block(1), Block(2));
    Plan(vec![
        Action::Unstack(c, a),
        Action::PutDown(c),
        Action::PickUp(a),
        Action::Stack(a, c),
        Action::PickUp(b),
        Action::Stack(b, a),
    ])
}

/// An ordered action sequence. Validity is decided by [`verify_plan`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan(pub Vec<Action>);

impl Plan {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }
}

impl FromIterator<Action> for Plan {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        Plan(iter.into_iter().collect())
    }
}

/// Result of checking a plan. Only the first failure is reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Outcome {
    Valid,
    Inapplicable { step: usize, reason: Reason },
    GoalUnsatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    /// The state after the last action, present when every action applied.
    pub final_state: Option<State>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.outcome == Outcome::Valid
    }
}

pub fn is_applicable(state: &State, action: Action) -> bool {
    state.check(action).is_ok()
}

pub fn apply(state: &State, action: Action) -> Result<State, DomainError> {
    state.apply(action)
}

pub fn satisfies_goal(state: &State, goal: &Goal) -> bool {
    goal.atoms().iter().all(|&atom| state.contains(Predicate::On(atom)))
}

pub fn verify_plan(puzzle: &Puzzle, plan: &Plan) -> Verdict {
    let mut state = puzzle.initial.clone();
    for (step, &action) in plan.actions().iter().enumerate() {
        match state.check(action) {
            Ok(()) => state = state.apply_unchecked(action),
            Err(reason) => {
                return Verdict {
                    outcome: Outcome::Inapplicable { step, reason },
                    final_state: None,
                }
            }
        }
    }
    let outcome = if satisfies_goal(&state, &puzzle.goal) {
        Outcome::Valid
    } else {
        Outcome::GoalUnsatisfied
    };
    Verdict {
        outcome,
        final_state: Some(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> (Block, Block, Block) {
        (Block(0), Block(1), Block(2))
    }

    #[test]
    fn example_first_step_is_applicable() {
        let (a, _, c) = abc();
        let p = Puzzle::prompt_example();
        assert!(is_applicable(p.initial(), Action::Unstack(c, a)));
        assert!(!is_applicable(p.initial(), Action::PickUp(a)));
    }

    #[test]
    fn pick_up_needs_empty_hand() {
        let (a, b, c) = abc();
        let s = State::from_stacks(3, &[vec![a], vec![b]], Some(c)).unwrap();
        assert!(!is_applicable(&s, Action::PickUp(b)));
        assert_eq!(s.check(Action::PickUp(b)), Err(Reason::HandNotEmpty));
    }

    #[test]
    fn unstack_effects() {
        let (a, b, c) = abc();
        let s = Puzzle::prompt_example().initial().clone();
        let next = apply(&s, Action::Unstack(c, a)).unwrap();
        let expected = State::new(
            3,
            [
                Predicate::Holding(c),
                Predicate::Clear(a),
                Predicate::Clear(b),
                Predicate::OnTable(a),
                Predicate::OnTable(b),
            ],
        )
        .unwrap();
        assert_eq!(next, expected);
    }

    #[test]
    fn put_down_then_pick_up_round_trips() {
        let (a, b, c) = abc();
        let s = State::from_stacks(3, &[vec![a], vec![b]], Some(c)).unwrap();
        let down = apply(&s, Action::PutDown(c)).unwrap();
        assert_eq!(apply(&down, Action::PickUp(c)).unwrap(), s);
    }

    #[test]
    fn inapplicable_is_an_error() {
        let (a, _, _) = abc();
        let s = Puzzle::prompt_example().initial().clone();
        assert!(matches!(
            apply(&s, Action::PickUp(a)),
            Err(DomainError::Inapplicable { .. })
        ));
    }

    #[test]
    fn example_plan_is_valid() {
        let p = Puzzle::prompt_example();
        let v = verify_plan(&p, &prompt_example_plan());
        assert!(v.is_valid());
        assert!(satisfies_goal(v.final_state.as_ref().unwrap(), p.goal()));
        assert!(!satisfies_goal(p.initial(), p.goal()));
    }

    #[test]
    fn empty_goal_always_satisfied() {
        let p = Puzzle::prompt_example();
        assert!(satisfies_goal(p.initial(), &Goal::new(vec![]).unwrap()));
    }

    #[test]
    fn empty_plan_on_satisfied_goal_is_valid() {
        let (a, _, c) = abc();
        let p = Puzzle::prompt_example();
        let goal = Goal::new(vec![Above::new(c, a).unwrap()]).unwrap();
        let p = Puzzle::new(p.initial().clone(), goal).unwrap();
        assert!(verify_plan(&p, &Plan::default()).is_valid());
    }

    #[test]
    fn swapped_steps_fail_at_the_first_bad_step() {
        // Swapping steps 3 and 5 (1-based) gives: unstack C A, put down C,
        // pick up B, stack A C, pick up A, stack B A. Step index 3 (stack A C)
        // fails because the hand holds B, not A.
        let mut plan = prompt_example_plan();
        plan.0.swap(2, 4);
        let v = verify_plan(&Puzzle::prompt_example(), &plan);
        assert_eq!(
            v.outcome,
            Outcome::Inapplicable {
                step: 3,
                reason: Reason::NotHolding { block: Block(0) }
            }
        );
        assert!(v.final_state.is_none());
    }

    #[test]
    fn goal_unsatisfied_reports_final_state() {
        let plan = Plan(prompt_example_plan().0[..2].to_vec());
        let v = verify_plan(&Puzzle::prompt_example(), &plan);
        assert_eq!(v.outcome, Outcome::GoalUnsatisfied);
        assert!(v.final_state.is_some());
    }
}
