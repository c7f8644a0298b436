//! Slippery gridworld benchmark with goal and penalty cells.
//!
//! Actions are `0 = up, 1 = down, 2 = left, 3 = right`. The intended move
//! succeeds with `intended_prob`; each of the two directions perpendicular to
//! the heading receives `side_prob`. Moves that would leave the grid keep the
//! agent in place. Rewards depend only on the occupied cell.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{DeterministicPolicy, Mdp};
use crate::rng;
use crate::scalar::Scalar;

pub const N_ACTIONS: usize = 4;
pub const CANONICAL_SIZES: [usize; 3] = [10, 15, 20];
const LAYOUT_SEED: u64 = 0x6772_6964;

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    /// The two headings perpendicular to `self`.
    pub fn lateral(self) -> [Action; 2] {
        match self {
            Action::Up | Action::Down => [Action::Left, Action::Right],
            Action::Left | Action::Right => [Action::Up, Action::Down],
        }
    }

    fn glyph(self) -> char {
        match self {
            Action::Up => '^',
            Action::Down => 'v',
            Action::Left => '<',
            Action::Right => '>',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub goal: Cell,
    #[serde(default)]
    pub bad_cells: BTreeSet<Cell>,
    #[serde(default = "defaults::goal_reward")]
    pub goal_reward: f64,
    #[serde(default = "defaults::bad_reward")]
    pub bad_reward: f64,
    #[serde(default = "defaults::step_reward")]
    pub step_reward: f64,
    #[serde(default = "defaults::intended_prob")]
    pub intended_prob: f64,
    #[serde(default = "defaults::side_prob")]
    pub side_prob: f64,
    /// Make the goal absorbing: every action at the goal self-loops.
    #[serde(default)]
    pub absorbing_goal: bool,
}

mod defaults {
    pub fn goal_reward() -> f64 {
        10.0
    }
    pub fn bad_reward() -> f64 {
        -6.0
    }
    pub fn step_reward() -> f64 {
        -1.0
    }
    pub fn intended_prob() -> f64 {
        0.7
    }
    pub fn side_prob() -> f64 {
        0.15
    }
}

impl GridLayout {
    /// Empty `rows × cols` grid with default rewards and slip probabilities.
    pub fn empty(rows: usize, cols: usize, start: Cell, goal: Cell) -> Self {
        Self {
            rows,
            cols,
            start,
            goal,
            bad_cells: BTreeSet::new(),
            goal_reward: defaults::goal_reward(),
            bad_reward: defaults::bad_reward(),
            step_reward: defaults::step_reward(),
            intended_prob: defaults::intended_prob(),
            side_prob: defaults::side_prob(),
            absorbing_goal: false,
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows * self.cols
    }

    pub fn state(&self, cell: Cell) -> usize {
        cell.0 * self.cols + cell.1
    }

    pub fn cell(&self, state: usize) -> Cell {
        (state / self.cols, state % self.cols)
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.0 < self.rows && c.1 < self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("grid needs at least one row and column"));
        }
        for (name, c) in [("start", self.start), ("goal", self.goal)] {
            if !self.in_bounds(c) {
                return Err(Error::config(format!("{name} cell {c:?} is out of bounds")));
            }
        }
        if let Some(c) = self.bad_cells.iter().find(|c| !self.in_bounds(**c)) {
            return Err(Error::config(format!("bad cell {c:?} is out of bounds")));
        }
        if self.bad_cells.contains(&self.goal) {
            return Err(Error::config("goal cell is listed as a bad cell"));
        }
        let total = self.intended_prob + 2.0 * self.side_prob;
        if self.intended_prob < 0.0 || self.side_prob < 0.0 || (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "intended_prob + 2·side_prob must equal 1, got {total}"
            )));
        }
        Ok(())
    }

    /// Destination of a move from `cell` heading `a`, staying put off-grid.
    pub fn step(&self, cell: Cell, a: Action) -> Cell {
        let (dr, dc) = a.delta();
        let r = cell.0 as isize + dr;
        let c = cell.1 as isize + dc;
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            cell
        } else {
            (r as usize, c as usize)
        }
    }

    pub fn cell_reward(&self, cell: Cell) -> f64 {
        if cell == self.goal {
            self.goal_reward
        } else if self.bad_cells.contains(&cell) {
            self.bad_reward
        } else {
            self.step_reward
        }
    }

    /// One character per cell: `S` start, `G` goal, `X` bad, `.` otherwise.
    pub fn ascii(&self) -> String {
        self.render(|cell| {
            if cell == self.goal {
                'G'
            } else if cell == self.start {
                'S'
            } else if self.bad_cells.contains(&cell) {
                'X'
            } else {
                '.'
            }
        })
    }

    /// Arrow per cell for a gridworld policy; the goal keeps its `G`.
    pub fn ascii_policy(&self, policy: &DeterministicPolicy) -> String {
        self.render(|cell| {
            if cell == self.goal {
                'G'
            } else {
                Action::ALL[policy.action(self.state(cell))].glyph()
            }
        })
    }

    fn render(&self, glyph: impl Fn(Cell) -> char) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(glyph((r, c)));
            }
            let _ = writeln!(out);
        }
        out
    }
}

/// Fixed layout for the benchmark sizes: start top-left, goal bottom-right and
/// `⌈size²/12⌉` seeded penalty cells.
pub fn canonical_layout(size: usize) -> Result<GridLayout> {
    if !CANONICAL_SIZES.contains(&size) {
        return Err(Error::config(format!(
            "no canonical layout for size {size}; expected one of {CANONICAL_SIZES:?}"
        )));
    }
    let start = (0, 0);
    let goal = (size - 1, size - 1);
    let n_bad = (size * size).div_ceil(12);
    let mut candidates: Vec<Cell> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&c| c != start && c != goal)
        .collect();
    candidates.shuffle(&mut rng::stream(LAYOUT_SEED, size as u64));
    let mut layout = GridLayout::empty(size, size, start, goal);
    layout.bad_cells = candidates.into_iter().take(n_bad).collect();
    Ok(layout)
}

pub fn build_gridworld<T: Scalar>(layout: &GridLayout, gamma: f64) -> Result<Mdp<T>> {
    layout.validate()?;
    let n = layout.n_states();
    let mut transition = vec![T::zero(); n * N_ACTIONS * n];
    let mut reward = vec![T::zero(); n * N_ACTIONS];
    for s in 0..n {
        let cell = layout.cell(s);
        let r = T::lit(layout.cell_reward(cell));
        for a in Action::ALL {
            let base = (s * N_ACTIONS + a as usize) * n;
            reward[s * N_ACTIONS + a as usize] = r;
            if layout.absorbing_goal && cell == layout.goal {
                transition[base + s] = T::one();
                continue;
            }
            let [l, rt] = a.lateral();
            for (dir, p) in [(a, layout.intended_prob), (l, layout.side_prob), (rt, layout.side_prob)] {
                let next = layout.state(layout.step(cell, dir));
                transition[base + next] += T::lit(p);
            }
        }
    }
    let mut init = vec![T::zero(); n];
    init[layout.state(layout.start)] = T::one();
    Mdp::from_flat(n, N_ACTIONS, transition, reward, T::lit(gamma), init)
}
