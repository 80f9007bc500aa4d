//! Periodic-boundary helpers shared by the field, the agents, and the
//! trajectory metrics.

/// Wraps a continuous coordinate into [0, extent).
pub fn wrap_pos(x: f64, extent: f64) -> f64 {
    let r = x.rem_euclid(extent);
    // rem_euclid of a tiny negative can round up to exactly `extent`.
    if r >= extent {
        0.0
    } else {
        r
    }
}

/// Wraps a cell index into [0, n).
pub fn wrap_cell(i: i64, n: i64) -> i64 {
    i.rem_euclid(n)
}

/// Signed minimum-image displacement: the representative of `d` modulo
/// `extent` with the smallest magnitude.
///
/// `%` (fmod) is exact in IEEE arithmetic and the corrective add/subtract
/// falls in the Sterbenz range, so inputs already in (-extent/2, extent/2]
/// pass through bit-identically.
pub fn min_image(d: f64, extent: f64) -> f64 {
    let r = d % extent;
    let half = extent / 2.0;
    if r > half {
        r - extent
    } else if r < -half {
        r + extent
    } else {
        r
    }
}

/// Squared minimum-image distance between two points.
pub fn min_image_dist_sq(ax: f64, ay: f64, bx: f64, by: f64, w: f64, h: f64) -> f64 {
    let dx = min_image(ax - bx, w);
    let dy = min_image(ay - by, h);
    dx * dx + dy * dy
}

/// Cell containing a continuous position (floor, wrapped).
pub fn cell_of(x: f64, y: f64, width: i64, height: i64) -> (i64, i64) {
    (
        wrap_cell(x.floor() as i64, width),
        wrap_cell(y.floor() as i64, height),
    )
}
