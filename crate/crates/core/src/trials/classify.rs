//! Subproblem labels.
//!
//! Labels are geometric: they assume an idealised agent that starts at the
//! center and is under the first object when it lands. Groups overlap.

use serde::{Deserialize, Serialize};

use super::{in_fov_rel, passing_time, Trial};
use crate::world::{ray_directions, WorldConfig};

/// Horizontal tolerance for "first object starts directly above the agent".
pub const DIRECTLY_ABOVE_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryLabels {
    /// Both objects land within catch radius of the start position.
    pub trivial_stationary: bool,
    /// The nearer object lands first and the second is still in view after
    /// the first catch.
    pub trivial_reactive: bool,
    /// The first lander starts farther from the agent.
    pub delayed_decision: bool,
    /// The faster object overtakes the slower one too far apart for both to
    /// be seen at once.
    pub unseen_passing: bool,
    /// The second object is out of view when the first is caught.
    pub object_permanence: bool,
    /// Start with horizontal overlap or swap horizontal order before the
    /// first landing.
    pub overlap_or_cross: bool,
    /// Out of view, and the second object lands on the side it drifts toward.
    pub same_direction_solvable: bool,
    /// Out of view, and the simple drift rule points the wrong way.
    pub reverse_required: bool,
    /// First object starts directly above, both drift the same way, no
    /// overlap or crossing.
    pub fig7_diagonal: bool,
}

impl CategoryLabels {
    pub const NAMES: [&'static str; 9] = [
        "trivial_stationary",
        "trivial_reactive",
        "delayed_decision",
        "unseen_passing",
        "object_permanence",
        "overlap_or_cross",
        "same_direction_solvable",
        "reverse_required",
        "fig7_diagonal",
    ];

    /// Flags in [`Self::NAMES`] order.
    pub fn flags(&self) -> [bool; 9] {
        [
            self.trivial_stationary,
            self.trivial_reactive,
            self.delayed_decision,
            self.unseen_passing,
            self.object_permanence,
            self.overlap_or_cross,
            self.same_direction_solvable,
            self.reverse_required,
            self.fig7_diagonal,
        ]
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        Self::NAMES.iter().position(|n| *n == name).map(|i| self.flags()[i])
    }
}

pub fn classify(trial: &Trial, cfg: &WorldConfig) -> CategoryLabels {
    let rays = ray_directions(cfg);
    let c = cfg.center();
    let (a, b) = (&trial.first, &trial.second);
    // Everything below is relative to the center line, so reflection is an
    // exact sign flip and labels are mirror-invariant.
    let (x1, x2) = (a.x0 - c, b.x0 - c);
    let (xl1, t1) = (x1 + a.vx * (a.y0 / a.vy), a.y0 / a.vy);
    let xl2 = x2 + b.vx * (b.y0 / b.vy);
    let p2 = x2 + b.vx * t1;
    let h2 = b.y0 - b.vy * t1;
    let catch = cfg.catch_radius();
    let r = cfg.object_radius();

    let trivial_stationary = xl1.abs() <= catch && xl2.abs() <= catch;
    let delayed_decision = x1.hypot(a.y0) > x2.hypot(b.y0);

    // best catching position for keeping the second object in view
    let agent = xl1 + (p2 - xl1).clamp(-catch, catch);
    let visible = in_fov_rel(agent, [p2, h2], cfg, &rays);
    let object_permanence = !visible;
    let trivial_reactive = !delayed_decision && visible;

    let same = object_permanence && (xl2 - xl1) * b.vx > 0.0;

    let overlap_or_cross = (x1 - x2).abs() <= 2.0 * r || (x1 - x2) * (xl1 - p2) < 0.0;

    let half_tan = (cfg.visual_angle / 2.0).tan();
    let unseen_passing = passing_time(trial).is_some_and(|tp| {
        let yp = a.y0 - a.vy * tp;
        let sep = ((x1 + a.vx * tp) - (x2 + b.vx * tp)).abs();
        sep > 2.0 * yp * half_tan + 2.0 * r
    });

    let fig7_diagonal = x1.abs() <= DIRECTLY_ABOVE_TOLERANCE && a.vx * b.vx > 0.0 && !overlap_or_cross;

    CategoryLabels {
        trivial_stationary,
        trivial_reactive,
        delayed_decision,
        unseen_passing,
        object_permanence,
        overlap_or_cross,
        same_direction_solvable: same,
        reverse_required: object_permanence && !same,
        fig7_diagonal,
    }
}
