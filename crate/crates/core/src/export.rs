// SPDX-License-Identifier: Apache-2.0

//! CSV writers for profiles. Values are written with full precision.

use std::fmt::Write as _;

use crate::deposition::{DepositionProfile, Profile2d};

/// One-axis profile as CSV. `header` lines are emitted as `# ` comments.
pub fn profile_csv(profile: &DepositionProfile, header: &[String]) -> String {
    let mut out = comments(header);
    let _ = writeln!(out, "# normalization {}", profile.normalization.as_str());
    out.push_str("x_lambda,rate\n");
    for (i, v) in profile.values.iter().enumerate() {
        let _ = writeln!(out, "{:.16e},{:.16e}", profile.grid.x(i), v);
    }
    out
}

/// Two-axis profile as CSV, one row per `(x, y)` sample.
pub fn profile_2d_csv(profile: &Profile2d, header: &[String]) -> String {
    let mut out = comments(header);
    let _ = writeln!(out, "# normalization {}", profile.normalization.as_str());
    out.push_str("x_lambda,y_lambda,rate\n");
    for i in 0..profile.x.samples {
        for j in 0..profile.y.samples {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                profile.x.x(i),
                profile.y.x(j),
                profile.at(i, j)
            );
        }
    }
    out
}

fn comments(header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        for l in line.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out
}
