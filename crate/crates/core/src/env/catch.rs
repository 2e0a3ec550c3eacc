//! Catch.
//!
//! A ball falls one row per step down a `width x height` board while the
//! agent moves a paddle along the bottom row. State `(paddle, ball_x, ball_y)`
//! has index `(ball_y * width + ball_x) * width + paddle`, so there are
//! `width^2 * height` states. When the ball sits on the bottom row the catch
//! is resolved: the agent is paid if the paddle is under the ball, and the ball
//! respawns at a uniformly random top-row column.

use crate::env::GridSpec;
use crate::error::Result;
use crate::mdp::{Outcome, TabularMdp};

/// Left, stay, right.
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct CatchLayout {
    width: usize,
    height: usize,
}

/// Decoded Catch state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatchState {
    pub paddle: usize,
    pub ball_x: usize,
    pub ball_y: usize,
}

impl CatchLayout {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(CatchLayout {
            width: spec.width,
            height: spec.height,
        })
    }

    pub fn n_states(&self) -> usize {
        self.width * self.width * self.height
    }

    pub fn index(&self, st: CatchState) -> usize {
        (st.ball_y * self.width + st.ball_x) * self.width + st.paddle
    }

    pub fn decode(&self, s: usize) -> CatchState {
        CatchState {
            paddle: s % self.width,
            ball_x: (s / self.width) % self.width,
            ball_y: s / (self.width * self.width),
        }
    }

    fn move_paddle(&self, paddle: usize, a: usize) -> usize {
        (paddle + a).saturating_sub(1).min(self.width - 1)
    }

    /// `(x_paddle, y_paddle, x_ball, y_ball)`.
    pub fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.n_states())
            .map(|s| {
                let st = self.decode(s);
                vec![
                    st.paddle as f64,
                    (self.height - 1) as f64,
                    st.ball_x as f64,
                    st.ball_y as f64,
                ]
            })
            .collect()
    }

    /// Ball uniformly on the top row, paddle centred.
    pub fn start_distribution(&self) -> Vec<f64> {
        let mut start = vec![0.0; self.n_states()];
        for bx in 0..self.width {
            start[self.index(CatchState {
                paddle: self.width / 2,
                ball_x: bx,
                ball_y: 0,
            })] = 1.0 / self.width as f64;
        }
        start
    }

    pub fn build_mdp(&self, spec: &GridSpec) -> Result<TabularMdp> {
        let n = self.n_states();
        let mut outcomes = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            let st = self.decode(s);
            for a in 0..N_ACTIONS {
                let paddle = self.move_paddle(st.paddle, a);
                if st.ball_y + 1 < self.height {
                    outcomes.push(vec![Outcome {
                        prob: 1.0,
                        reward: 0.0,
                        next: self.index(CatchState {
                            paddle,
                            ball_x: st.ball_x,
                            ball_y: st.ball_y + 1,
                        }),
                    }]);
                } else {
                    let reward = if st.paddle == st.ball_x {
                        spec.reward_value
                    } else {
                        0.0
                    };
                    outcomes.push(
                        (0..self.width)
                            .map(|bx| Outcome {
                                prob: 1.0 / self.width as f64,
                                reward,
                                next: self.index(CatchState {
                                    paddle,
                                    ball_x: bx,
                                    ball_y: 0,
                                }),
                            })
                            .collect(),
                    );
                }
            }
        }
        TabularMdp::from_outcomes(
            n,
            N_ACTIONS,
            outcomes,
            spec.gamma,
            self.start_distribution(),
        )
    }
}

/// Builds the Catch MDP described by `spec`.
pub fn build_catch(spec: &GridSpec) -> Result<TabularMdp> {
    CatchLayout::new(spec)?.build_mdp(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{evaluate_exact, ModelView, TabularPolicy};
    use crate::rng;

    #[test]
    fn default_has_250_states() {
        let mdp = build_catch(&GridSpec::catch()).unwrap();
        assert_eq!(mdp.n_states(), 250);
        assert_eq!(mdp.n_actions(), 3);
        for p in mdp.transitions() {
            for row in p.row_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn index_round_trips() {
        let layout = CatchLayout::new(&GridSpec::catch()).unwrap();
        for s in 0..layout.n_states() {
            assert_eq!(layout.index(layout.decode(s)), s);
        }
    }

    fn chase_policy(layout: &CatchLayout) -> TabularPolicy {
        let actions: Vec<usize> = (0..layout.n_states())
            .map(|s| {
                let st = layout.decode(s);
                match st.paddle.cmp(&st.ball_x) {
                    std::cmp::Ordering::Less => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Greater => 0,
                }
            })
            .collect();
        TabularPolicy::deterministic(&actions, N_ACTIONS)
    }

    #[test]
    fn chasing_value_matches_monte_carlo() {
        let spec = GridSpec::catch();
        let layout = CatchLayout::new(&spec).unwrap();
        let mdp = layout.build_mdp(&spec).unwrap();
        let pi = chase_policy(&layout);
        let exact = evaluate_exact(&mdp, &pi).unwrap().mean();

        let actions = pi.greedy_actions();
        let mut rng = rng::seeded(17);
        let episodes = 10_000;
        let horizon = 2_500; // gamma^horizon < 1e-10
        let mut total = 0.0;
        for e in 0..episodes {
            let mut s = e % layout.n_states();
            let mut discount = 1.0;
            let mut ret = 0.0;
            for _ in 0..horizon {
                let (r, next) = mdp.step(s, actions[s], &mut rng);
                ret += discount * r;
                discount *= spec.gamma;
                s = next;
            }
            total += ret;
        }
        let mc = total / episodes as f64;
        assert!(
            (mc - exact).abs() < 0.01,
            "exact {exact} vs monte carlo {mc}"
        );
    }
}
