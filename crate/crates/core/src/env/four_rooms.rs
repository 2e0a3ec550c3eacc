//! Four Rooms gridworld.
//!
//! The interior is a `width x height` grid split by one vertical wall and two
//! horizontal half-walls, each pierced by a single doorway. With the default
//! 11x11 interior this is the classic layout with 104 open cells. Open cells
//! are indexed in row-major order (`y` from the top, then `x`); the
//! coordinate embedding of a state is `(x, y)`.

use std::fmt;
use std::str::FromStr;

use crate::env::GridSpec;
use crate::error::{Result, VeqError};
use crate::mdp::{Outcome, TabularMdp};

/// Up, down, left, right.
pub const N_ACTIONS: usize = 4;
const MOVES: [(i64, i64); N_ACTIONS] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalCorner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl fmt::Display for GoalCorner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoalCorner::TopLeft => "top_left",
            GoalCorner::TopRight => "top_right",
            GoalCorner::BottomLeft => "bottom_left",
            GoalCorner::BottomRight => "bottom_right",
        })
    }
}

impl FromStr for GoalCorner {
    type Err = VeqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_left" => Ok(GoalCorner::TopLeft),
            "top_right" => Ok(GoalCorner::TopRight),
            "bottom_left" => Ok(GoalCorner::BottomLeft),
            "bottom_right" => Ok(GoalCorner::BottomRight),
            _ => Err(VeqError::invalid(format!("unknown goal corner '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FourRoomsLayout {
    width: usize,
    height: usize,
    open: Vec<bool>,
    cells: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
    goal: usize,
}

impl FourRoomsLayout {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let (w, h) = (spec.width, spec.height);
        if w < 5 || h < 5 {
            return Err(VeqError::invalid(format!(
                "{w}x{h} grid is too small to place four rooms (need at least 5x5)"
            )));
        }
        let cx = w / 2;
        let row_left = h / 2;
        let row_right = h / 2 + 1;
        let door_up = row_left / 2;
        let door_down = (row_right + 1 + h) / 2;
        let door_left = cx / 2 - 1;
        let door_right = (cx + 1 + w) / 2;

        let mut open = vec![true; w * h];
        for y in 0..h {
            if y != door_up && y != door_down {
                open[y * w + cx] = false;
            }
        }
        for x in 0..cx {
            if x != door_left {
                open[row_left * w + x] = false;
            }
        }
        for x in cx + 1..w {
            if x != door_right {
                open[row_right * w + x] = false;
            }
        }

        let mut cells = Vec::new();
        let mut index = vec![None; w * h];
        for y in 0..h {
            for x in 0..w {
                if open[y * w + x] {
                    index[y * w + x] = Some(cells.len());
                    cells.push((x, y));
                }
            }
        }
        let (gx, gy) = match spec.goal {
            GoalCorner::TopLeft => (0, 0),
            GoalCorner::TopRight => (w - 1, 0),
            GoalCorner::BottomLeft => (0, h - 1),
            GoalCorner::BottomRight => (w - 1, h - 1),
        };
        let goal = index[gy * w + gx].ok_or_else(|| VeqError::invalid("goal corner is a wall"))?;
        Ok(FourRoomsLayout {
            width: w,
            height: h,
            open,
            cells,
            index,
            goal,
        })
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    /// `(x, y)` of a state.
    pub fn position(&self, s: usize) -> (usize, usize) {
        self.cells[s]
    }

    /// State at `(x, y)`, or `None` for walls and out-of-range positions.
    pub fn state_at(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.index[y * self.width + x]
    }

    pub fn is_open(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.open[y * self.width + x]
    }

    /// Deterministic result of moving in direction `dir`; blocked moves stay.
    pub fn move_from(&self, s: usize, dir: usize) -> usize {
        let (x, y) = self.cells[s];
        let (dx, dy) = MOVES[dir];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 {
            return s;
        }
        self.state_at(nx as usize, ny as usize).unwrap_or(s)
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|&(x, y)| vec![x as f64, y as f64])
            .collect()
    }

    /// Uniform over every open cell except the goal.
    pub fn start_distribution(&self) -> Vec<f64> {
        let n = self.n_states();
        let p = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|s| if s == self.goal { 0.0 } else { p })
            .collect()
    }

    pub fn build_mdp(&self, spec: &GridSpec) -> Result<TabularMdp> {
        let n = self.n_states();
        let start = self.start_distribution();
        let mut outcomes = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for a in 0..N_ACTIONS {
                let mut outs = Vec::new();
                for dir in 0..N_ACTIONS {
                    let prob = if dir == a {
                        1.0 - spec.slip_prob
                    } else {
                        spec.slip_prob / (N_ACTIONS - 1) as f64
                    };
                    if prob == 0.0 {
                        continue;
                    }
                    let target = self.move_from(s, dir);
                    if target == self.goal {
                        // Entering the goal pays out and teleports to the start distribution.
                        outs.extend(start.iter().enumerate().filter(|(_, &p)| p > 0.0).map(
                            |(t, &p)| Outcome {
                                prob: prob * p,
                                reward: spec.reward_value,
                                next: t,
                            },
                        ));
                    } else {
                        outs.push(Outcome {
                            prob,
                            reward: 0.0,
                            next: target,
                        });
                    }
                }
                outcomes.push(outs);
            }
        }
        TabularMdp::from_outcomes(n, N_ACTIONS, outcomes, spec.gamma, start)
    }
}

/// Builds the Four Rooms MDP described by `spec`.
pub fn build_four_rooms(spec: &GridSpec) -> Result<TabularMdp> {
    FourRoomsLayout::new(spec)?.build_mdp(spec)
}
