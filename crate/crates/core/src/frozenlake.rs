//! FrozenLake gridworlds with perpendicular slipping.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, Environment, State, Transition};
use crate::rng::RngStream;

pub const DEFAULT_GAMMA: f64 = 0.95;

const MAP_4: &str = "FFFF\nFHFH\nFFFH\nHFFG\n";
const MAP_8: &str = "FFFFFFFF\nFFFFFFFF\nFFFHFFFF\nFFFFFHFF\nFFFHFFFF\nFHHFFFHF\nFHFFHFHF\nFFFHFFFG\n";
const MAP_12: &str = include_str!("../maps/fl12.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Frozen,
    Hole,
    Goal,
}

impl CellKind {
    pub fn is_terminal(self) -> bool {
        !matches!(self, CellKind::Frozen)
    }

    fn symbol(self) -> char {
        match self {
            CellKind::Frozen => 'F',
            CellKind::Hole => 'H',
            CellKind::Goal => 'G',
        }
    }
}

/// Square grid of cells, indexed by `(x, y)` = (column, row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    size: usize,
    cells: Vec<CellKind>,
}

impl GridMap {
    /// Parses the text map format: `M` lines of `M` characters from `F`, `H`, `G`.
    /// A leading `S` is accepted as a frozen start cell.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let size = rows.len();
        if size == 0 {
            return Err(Error::Map("map is empty".into()));
        }
        let mut cells = Vec::with_capacity(size * size);
        for (y, row) in rows.iter().enumerate() {
            let width = row.chars().count();
            if width != size {
                return Err(Error::Map(format!(
                    "row {} has {width} cells, expected {size} (maps must be square)",
                    y + 1
                )));
            }
            for (x, c) in row.chars().enumerate() {
                cells.push(match c {
                    'F' | 'S' => CellKind::Frozen,
                    'H' => CellKind::Hole,
                    'G' => CellKind::Goal,
                    other => {
                        return Err(Error::Map(format!(
                            "unknown cell '{other}' at row {}, column {}",
                            y + 1,
                            x + 1
                        )))
                    }
                });
            }
        }
        let map = Self { size, cells };
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Map(format!("{}: {e}", path.display())))
    }

    /// The bundled map for grid size 4, 8 or 12.
    pub fn default_for(size: usize) -> Result<Self> {
        let text = match size {
            4 => MAP_4,
            8 => MAP_8,
            12 => MAP_12,
            other => {
                return Err(Error::Config(format!(
                    "no bundled map for grid size {other}; set map_path"
                )))
            }
        };
        Self::parse(text)
    }

    fn validate(&self) -> Result<()> {
        let goals = self.cells.iter().filter(|&&c| c == CellKind::Goal).count();
        if goals != 1 {
            return Err(Error::Map(format!("map must contain exactly one goal, found {goals}")));
        }
        if !self.cells.contains(&CellKind::Frozen) {
            return Err(Error::Map("map has no frozen cells".into()));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, s: State) -> bool {
        let m = self.size as i32;
        (0..m).contains(&s.x) && (0..m).contains(&s.y)
    }

    pub fn cell(&self, s: State) -> CellKind {
        debug_assert!(self.contains(s), "{s} outside {}x{} grid", self.size, self.size);
        self.cells[s.y as usize * self.size + s.x as usize]
    }

    /// All cells in row-major order.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        let m = self.size as i32;
        (0..m).flat_map(move |y| (0..m).map(move |x| State::new(x, y)))
    }

    pub fn frozen_cells(&self) -> Vec<State> {
        self.states().filter(|&s| self.cell(s) == CellKind::Frozen).collect()
    }

    pub fn goal(&self) -> State {
        self.states()
            .find(|&s| self.cell(s) == CellKind::Goal)
            .expect("validated map has a goal")
    }

    /// Cell reached by moving one step in `dir`; off-grid moves stay put.
    pub fn neighbour(&self, s: State, dir: Action) -> State {
        let (dx, dy) = dir.delta();
        let n = State::new(s.x + dx, s.y + dy);
        if self.contains(n) {
            n
        } else {
            s
        }
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.size) {
            let line: String = row.iter().map(|c| c.symbol()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

pub fn default_t_max(size: usize) -> usize {
    150 * size / 4
}

/// A FrozenLake MDP: map, slip probability, discount and episode cap.
#[derive(Debug, Clone)]
pub struct FlEnv {
    map: GridMap,
    p_slip: f64,
    gamma: f64,
    t_max: usize,
    initial: Vec<State>,
}

impl FlEnv {
    pub fn new(map: GridMap, p_slip: f64) -> Result<Self> {
        let t_max = default_t_max(map.size());
        Self::with_params(map, p_slip, DEFAULT_GAMMA, t_max)
    }

    pub fn with_params(map: GridMap, p_slip: f64, gamma: f64, t_max: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&p_slip) {
            return Err(Error::Config(format!("p_slip must lie in [0, 1), got {p_slip}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if t_max == 0 {
            return Err(Error::Config("t_max must be positive".into()));
        }
        let initial = map.frozen_cells();
        Ok(Self {
            map,
            p_slip,
            gamma,
            t_max,
            initial,
        })
    }

    /// Bundled map of size `size` with the given slip probability.
    pub fn standard(size: usize, p_slip: f64) -> Result<Self> {
        Self::new(GridMap::default_for(size)?, p_slip)
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn size(&self) -> usize {
        self.map.size()
    }

    pub fn p_slip(&self) -> f64 {
        self.p_slip
    }

    pub fn is_deterministic(&self) -> bool {
        self.p_slip == 0.0
    }

    pub fn is_terminal(&self, s: State) -> bool {
        self.map.cell(s).is_terminal()
    }

    /// `(x, y)` label used in reports, e.g. `(8, 0.3)`.
    pub fn label(&self) -> String {
        format!("({}, {})", self.size(), self.p_slip)
    }

    fn outcome(&self, next: State) -> (f64, bool) {
        match self.map.cell(next) {
            CellKind::Goal => (1.0, true),
            CellKind::Hole => (0.0, true),
            CellKind::Frozen => (0.0, false),
        }
    }

    /// Explicit successor distribution of `(s, a)`, duplicate successors merged.
    pub fn transition_model(&self, s: State, a: Action) -> Vec<Successor> {
        assert!(!self.is_terminal(s), "transition model queried from terminal cell {s}");
        let [p1, p2] = a.perpendicular();
        let side = self.p_slip / 2.0;
        let mut merged: BTreeMap<State, f64> = BTreeMap::new();
        for (dir, prob) in [(a, 1.0 - self.p_slip), (p1, side), (p2, side)] {
            if prob > 0.0 {
                *merged.entry(self.map.neighbour(s, dir)).or_insert(0.0) += prob;
            }
        }
        merged
            .into_iter()
            .map(|(next, probability)| {
                let (reward, terminal) = self.outcome(next);
                Successor {
                    next,
                    probability,
                    reward,
                    terminal,
                }
            })
            .collect()
    }
}

impl Environment for FlEnv {
    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn t_max(&self) -> usize {
        self.t_max
    }

    fn initial_states(&self) -> &[State] {
        &self.initial
    }

    fn step(&self, s: State, a: Action, rng: &mut RngStream) -> Transition {
        assert!(!self.is_terminal(s), "step taken from terminal cell {s}");
        let dir = if self.p_slip == 0.0 {
            a
        } else {
            let u: f64 = rng.gen();
            let [p1, p2] = a.perpendicular();
            if u < 1.0 - self.p_slip {
                a
            } else if u < 1.0 - self.p_slip / 2.0 {
                p1
            } else {
                p2
            }
        };
        let next = self.map.neighbour(s, dir);
        let (reward, terminal) = self.outcome(next);
        Transition { next, reward, terminal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub next: State,
    pub probability: f64,
    pub reward: f64,
    pub terminal: bool,
}
