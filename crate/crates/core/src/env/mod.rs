//! Ground-truth environments and experience collection.

pub mod catch;
pub mod dataset;
pub mod four_rooms;
pub mod toy;

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, VeqError};
use crate::mdp::{ModelView, TabularMdp};

pub use catch::{build_catch, CatchLayout};
pub use dataset::{collect_dataset, Transition, TransitionDataset};
pub use four_rooms::{build_four_rooms, FourRoomsLayout, GoalCorner};
pub use toy::{build_toy_mdp, build_toy_variant, TOY_GAMMA, TOY_P_A, TOY_P_B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    FourRooms,
    Catch,
    /// The 3-state, 2-action example MDP.
    Toy,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::FourRooms => "four_rooms",
            EnvKind::Catch => "catch",
            EnvKind::Toy => "toy",
        })
    }
}

impl FromStr for EnvKind {
    type Err = VeqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four_rooms" | "fourrooms" => Ok(EnvKind::FourRooms),
            "catch" => Ok(EnvKind::Catch),
            "toy" => Ok(EnvKind::Toy),
            _ => Err(VeqError::invalid(format!("unknown environment '{s}'"))),
        }
    }
}

/// Environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: EnvKind,
    /// Interior width (Four Rooms) or number of columns (Catch).
    pub width: usize,
    pub height: usize,
    /// Four Rooms only: probability of moving in one of the other three directions.
    pub slip_prob: f64,
    pub reward_value: f64,
    pub gamma: f64,
    /// Four Rooms only.
    pub goal: GoalCorner,
}

impl GridSpec {
    /// Classic 11x11 Four Rooms (104 cells), 10% slip, goal in the top-right corner.
    pub fn four_rooms() -> Self {
        GridSpec {
            kind: EnvKind::FourRooms,
            width: 11,
            height: 11,
            slip_prob: 0.1,
            reward_value: 1.0,
            gamma: 0.99,
            goal: GoalCorner::TopRight,
        }
    }

    /// 5 columns by 10 rows (250 states).
    pub fn catch() -> Self {
        GridSpec {
            kind: EnvKind::Catch,
            width: 5,
            height: 10,
            slip_prob: 0.0,
            reward_value: 1.0,
            gamma: 0.99,
            goal: GoalCorner::TopRight,
        }
    }

    pub fn toy() -> Self {
        GridSpec {
            kind: EnvKind::Toy,
            width: 3,
            height: 1,
            slip_prob: 0.0,
            reward_value: 1.0,
            gamma: toy::TOY_GAMMA,
            goal: GoalCorner::TopRight,
        }
    }

    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::FourRooms => Self::four_rooms(),
            EnvKind::Catch => Self::catch(),
            EnvKind::Toy => Self::toy(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.kind != EnvKind::Toy && (self.width < 2 || self.height < 2) {
            return Err(VeqError::invalid(format!(
                "grid {}x{} is smaller than 2x2",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(VeqError::invalid(format!(
                "slip probability {} outside [0, 1]",
                self.slip_prob
            )));
        }
        Ok(())
    }
}

/// A ground-truth MDP together with the coordinate embedding of its states.
#[derive(Debug, Clone)]
pub struct Environment {
    pub spec: GridSpec,
    pub mdp: TabularMdp,
    /// Per-state coordinate vectors used for state aggregation.
    pub coords: Vec<Vec<f64>>,
}

impl Environment {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        let (mdp, coords) = match spec.kind {
            EnvKind::FourRooms => {
                let layout = FourRoomsLayout::new(spec)?;
                (layout.build_mdp(spec)?, layout.coords())
            }
            EnvKind::Catch => {
                let layout = CatchLayout::new(spec)?;
                (layout.build_mdp(spec)?, layout.coords())
            }
            EnvKind::Toy => {
                let mdp = build_toy_mdp().with_gamma(spec.gamma)?;
                let coords = (0..mdp.n_states()).map(|s| vec![s as f64]).collect();
                (mdp, coords)
            }
        };
        Ok(Environment {
            spec: spec.clone(),
            mdp,
            coords,
        })
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }
}
