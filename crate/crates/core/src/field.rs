//! Shared 2-D periodic pheromone grid.
//!
//! Cells store raw (unclamped) amounts; every readout clamps to [0, 1] so
//! observables match the sensor/motor value domain. Each written cell also
//! remembers its last depositor so fitness can exclude an agent's own
//! releases.
//!
//! Decay is applied lazily. In multiplicative mode a single global scale
//! factor absorbs each `decay` call in O(1); a cell stores the scale that
//! was current when it was written and reads reconstruct the decayed amount
//! from the ratio. Subtractive mode (config switch) works the same way with
//! a global accumulated subtrahend. A freshly written cell therefore reads
//! back its written value exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::space::{min_image, wrap_cell, wrap_pos};

pub const NO_OWNER: u32 = u32::MAX;

/// Evaporation law applied by [`PheromoneField::decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// amount *= (1 - rate) per step (exponential evaporation, default).
    Multiplicative,
    /// amount = max(0, amount - rate) per step.
    Subtractive,
}

/// One bell-shaped initial pheromone deposit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpot {
    /// Peak amount.
    pub a: f64,
    /// Spread in cells.
    pub sigma: f64,
    pub xc: f64,
    pub yc: f64,
}

impl GaussianSpot {
    /// Spot value at a point, with periodic minimum-image distance.
    pub fn value_at(&self, x: f64, y: f64, width: f64, height: f64) -> f64 {
        let dx = min_image(x - self.xc, width);
        let dy = min_image(y - self.yc, height);
        self.a * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Inclusive parameter ranges for randomly generated spots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotRanges {
    pub amount: (f64, f64),
    pub sigma: (f64, f64),
    /// Center margin from the grid edge; centers are drawn from
    /// [margin, extent - margin - 1].
    pub center_margin: f64,
}

impl Default for SpotRanges {
    fn default() -> Self {
        // Default ranges for the 600-cell grid: a in [0.2,1.0], sigma in
        // [50,100], centers in [2,597].
        SpotRanges {
            amount: (0.2, 1.0),
            sigma: (50.0, 100.0),
            center_margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneField {
    width: i64,
    height: i64,
    mode: DecayMode,
    /// Raw amount as written; actual amount is reconstructed against `basis`.
    raw: Vec<f64>,
    /// Global decay state at the time each cell was last written.
    basis: Vec<f64>,
    owner: Vec<u32>,
    /// Multiplicative: global scale (product of all 1-rate).
    /// Subtractive: global accumulated subtrahend (sum of all rates).
    decay_state: f64,
}

impl PheromoneField {
    pub fn empty(width: u32, height: u32, mode: DecayMode) -> Self {
        let n = (width as usize) * (height as usize);
        let init = match mode {
            DecayMode::Multiplicative => 1.0,
            DecayMode::Subtractive => 0.0,
        };
        PheromoneField {
            width: width as i64,
            height: height as i64,
            mode,
            raw: vec![0.0; n],
            basis: vec![init; n],
            owner: vec![NO_OWNER; n],
            decay_state: init,
        }
    }

    /// Field initialized as the superposition of the given spots, evaluated
    /// at integer cell coordinates. No cell has an owner.
    pub fn from_spots(width: u32, height: u32, mode: DecayMode, spots: &[GaussianSpot]) -> Self {
        let mut field = Self::empty(width, height, mode);
        let (w, h) = (field.width as f64, field.height as f64);
        for y in 0..field.height {
            for x in 0..field.width {
                let mut amount = 0.0;
                for s in spots {
                    amount += s.value_at(x as f64, y as f64, w, h);
                }
                let i = field.index(x, y);
                field.raw[i] = amount;
            }
        }
        field
    }

    /// Draws `n` spots from `ranges` (order per spot: amount, sigma, xc, yc)
    /// and builds the superposed field.
    pub fn init_spots(
        width: u32,
        height: u32,
        mode: DecayMode,
        ranges: &SpotRanges,
        n: u32,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let spots = draw_spots(width, height, ranges, n, rng);
        Self::from_spots(width, height, mode, &spots)
    }

    pub fn width(&self) -> u32 {
        self.width as u32
    }

    pub fn height(&self) -> u32 {
        self.height as u32
    }

    fn index(&self, x: i64, y: i64) -> usize {
        debug_assert!(x >= 0 && x < self.width && y >= 0 && y < self.height);
        (y * self.width + x) as usize
    }

    fn amount_at_index(&self, i: usize) -> f64 {
        let raw = self.raw[i];
        if raw == 0.0 {
            return 0.0;
        }
        match self.mode {
            DecayMode::Multiplicative => raw * (self.decay_state / self.basis[i]),
            DecayMode::Subtractive => (raw - (self.decay_state - self.basis[i])).max(0.0),
        }
    }

    /// Unclamped amount of the cell at integer coordinates (wrapped).
    pub fn amount_at_cell(&self, x: i64, y: i64) -> f64 {
        let i = self.index(wrap_cell(x, self.width), wrap_cell(y, self.height));
        self.amount_at_index(i)
    }

    /// Owner of the cell containing `pos`, if any deposit touched it.
    pub fn owner_at(&self, x: f64, y: f64) -> Option<u32> {
        let (cx, cy) = crate::space::cell_of(x, y, self.width, self.height);
        let o = self.owner[self.index(cx, cy)];
        (o != NO_OWNER).then_some(o)
    }

    /// Clamped readout of the cell containing `pos`: min(1, amount).
    pub fn read(&self, x: f64, y: f64) -> f64 {
        let (cx, cy) = crate::space::cell_of(x, y, self.width, self.height);
        self.amount_at_index(self.index(cx, cy)).min(1.0)
    }

    /// Mean clamped amount over all cells whose centers (x+0.5, y+0.5) lie
    /// within minimum-image Euclidean distance `radius` of `center`.
    pub fn sense_disc(&self, cx: f64, cy: f64, radius: f64) -> f64 {
        debug_assert!(radius > 0.0);
        debug_assert!(radius + 1.0 < self.width as f64 / 2.0);
        // Cell centers live at i + 0.5; reduce the query point once so the
        // scan window stays local and distances need no further wrapping.
        let bx = wrap_pos(cx, self.width as f64);
        let by = wrap_pos(cy, self.height as f64);
        let r2 = radius * radius;
        let lo_x = (bx - radius - 0.5).floor() as i64;
        let hi_x = (bx + radius - 0.5).ceil() as i64;
        let lo_y = (by - radius - 0.5).floor() as i64;
        let hi_y = (by + radius - 0.5).ceil() as i64;
        let mut sum = 0.0;
        let mut count = 0u32;
        for y in lo_y..=hi_y {
            let dy = min_image(by - (y as f64 + 0.5), self.height as f64);
            for x in lo_x..=hi_x {
                let dx = min_image(bx - (x as f64 + 0.5), self.width as f64);
                if dx * dx + dy * dy <= r2 {
                    sum += self.amount_at_cell(x, y).min(1.0);
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Writes `value` into the 3x3 block of cells centered on the cell
    /// containing `pos`, overwriting amounts and setting the owner.
    pub fn deposit(&mut self, agent: u32, x: f64, y: f64, value: f64) {
        let (cx, cy) = crate::space::cell_of(x, y, self.width, self.height);
        for dy in -1..=1 {
            let yy = wrap_cell(cy + dy, self.height);
            for dx in -1..=1 {
                let xx = wrap_cell(cx + dx, self.width);
                let i = self.index(xx, yy);
                self.raw[i] = value;
                self.basis[i] = self.decay_state;
                self.owner[i] = agent;
            }
        }
    }

    /// Applies one step of evaporation at `rate` (0 <= rate < 1). O(1).
    pub fn decay(&mut self, rate: f64) {
        debug_assert!((0.0..1.0).contains(&rate));
        match self.mode {
            DecayMode::Multiplicative => {
                self.decay_state *= 1.0 - rate;
                if self.decay_state < 1e-100 {
                    self.flush_scale();
                }
            }
            DecayMode::Subtractive => {
                self.decay_state += rate;
            }
        }
    }

    /// Folds the global scale into the cells and resets it to 1. Keeps
    /// ratios representable on extremely long multiplicative runs.
    fn flush_scale(&mut self) {
        for i in 0..self.raw.len() {
            if self.raw[i] != 0.0 {
                self.raw[i] *= self.decay_state / self.basis[i];
            }
            self.basis[i] = 1.0;
        }
        self.decay_state = 1.0;
    }

    /// Clamped amount at `pos` excluding the reading agent's own releases:
    /// zero when the cell's last depositor is `agent`.
    pub fn gain_at(&self, agent: u32, x: f64, y: f64) -> f64 {
        match self.owner_at(x, y) {
            Some(o) if o == agent => 0.0,
            _ => self.read(x, y),
        }
    }

    /// Sum of unclamped amounts over the whole grid.
    pub fn total_mass(&self) -> f64 {
        (0..self.raw.len()).map(|i| self.amount_at_index(i)).sum()
    }

    /// Dense snapshot of clamped per-cell amounts, row-major.
    pub fn snapshot(&self) -> Vec<f64> {
        (0..self.raw.len())
            .map(|i| self.amount_at_index(i).min(1.0))
            .collect()
    }
}

/// Draws spot parameters uniformly from the configured ranges.
pub fn draw_spots(
    width: u32,
    height: u32,
    ranges: &SpotRanges,
    n: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<GaussianSpot> {
    let cx_hi = width as f64 - ranges.center_margin - 1.0;
    let cy_hi = height as f64 - ranges.center_margin - 1.0;
    (0..n)
        .map(|_| GaussianSpot {
            a: rng.random_range(ranges.amount.0..=ranges.amount.1),
            sigma: rng.random_range(ranges.sigma.0..=ranges.sigma.1),
            xc: rng.random_range(ranges.center_margin..=cx_hi),
            yc: rng.random_range(ranges.center_margin..=cy_hi),
        })
        .collect()
}
