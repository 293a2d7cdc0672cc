//! Episodic MDP contract shared by every learner: states, actions, the
//! policy interface, rollouts and performance evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Number of state dimensions of a grid state.
pub const STATE_DIM: usize = 2;

/// Allocentric grid position: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub x: i32,
    pub y: i32,
}

impl State {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn coords(&self) -> [i32; STATE_DIM] {
        [self.x, self.y]
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Left, Action::Down, Action::Right, Action::Up];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Unit displacement `(dx, dy)`; rows grow downwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Left => (-1, 0),
            Action::Down => (0, 1),
            Action::Right => (1, 0),
            Action::Up => (0, -1),
        }
    }

    /// The two directions at right angles to `self`.
    pub fn perpendicular(self) -> [Action; 2] {
        match self {
            Action::Left | Action::Right => [Action::Down, Action::Up],
            Action::Down | Action::Up => [Action::Left, Action::Right],
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        Action::from_index(v as usize).ok_or_else(|| format!("action id {v} out of range 0..4"))
    }
}

/// Outcome of querying a policy: an action, or nothing because no rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Act(Action),
    Null,
}

impl Decision {
    pub fn action(self) -> Option<Action> {
        match self {
            Decision::Act(a) => Some(a),
            Decision::Null => None,
        }
    }
}

pub trait Policy {
    fn decide(&self, state: State) -> Decision;
}

impl<F> Policy for F
where
    F: Fn(State) -> Decision,
{
    fn decide(&self, state: State) -> Decision {
        self(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: State,
    pub reward: f64,
    pub terminal: bool,
}

/// An episodic MDP with a finite set of initial states.
pub trait Environment {
    fn gamma(&self) -> f64;
    fn t_max(&self) -> usize;
    fn initial_states(&self) -> &[State];
    fn step(&self, state: State, action: Action, rng: &mut RngStream) -> Transition;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    /// Indices of the rules that advocated `action`; only recorded by
    /// learners that reinforce their rules from trajectories.
    pub action_set: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// Ended by a null decision or by the step cap instead of a terminal cell.
    pub truncated: bool,
    pub null_action: bool,
}

impl Trajectory {
    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }
}

/// `sum_t gamma^t * r_t`, with `t` counted from zero.
pub fn discounted_return<I>(rewards: I, gamma: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Runs one episode of `policy` from `initial`.
pub fn rollout<E, P>(env: &E, policy: &P, initial: State, rng: &mut RngStream) -> (f64, Trajectory)
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let mut traj = Trajectory::default();
    let mut state = initial;
    let mut terminal = false;
    while traj.steps.len() < env.t_max() {
        let Decision::Act(action) = policy.decide(state) else {
            traj.null_action = true;
            break;
        };
        let t = env.step(state, action, rng);
        traj.steps.push(TrajectoryStep {
            state,
            action,
            reward: t.reward,
            action_set: None,
        });
        state = t.next;
        if t.terminal {
            terminal = true;
            break;
        }
    }
    traj.truncated = !terminal;
    let g = discounted_return(traj.rewards(), env.gamma());
    (g, traj)
}

/// Return of one episode without recording the trajectory; `None` on a null decision.
pub(crate) fn episode_return<E, P>(env: &E, policy: &P, initial: State, rng: &mut RngStream) -> Option<f64>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let gamma = env.gamma();
    let mut state = initial;
    let mut discount = 1.0;
    let mut total = 0.0;
    for _ in 0..env.t_max() {
        let action = policy.decide(state).action()?;
        let t = env.step(state, action, rng);
        total += discount * t.reward;
        discount *= gamma;
        if t.terminal {
            break;
        }
        state = t.next;
    }
    Some(total)
}

/// Mean return over the test sequence `z`.
///
/// A null decision in any rollout makes the whole evaluation worth exactly 0
/// and stops the remaining rollouts.
pub fn evaluate_performance<E, P>(env: &E, policy: &P, z: &[State], rng: &mut RngStream) -> Result<f64>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    if z.is_empty() {
        return Err(Error::Config("test sequence z is empty".into()));
    }
    let mut sum = 0.0;
    for &start in z {
        match episode_return(env, policy, start, rng) {
            Some(g) => sum += g,
            None => return Ok(0.0),
        }
    }
    Ok(sum / z.len() as f64)
}
