//! Finite-difference solver for the continuous-time limit of the tree,
//!
//! `V_t + 1/2 sigma^2 S^2 V_SS + (r + lambda eta) S V_S - (r + lambda) V
//!     + lambda max(R N, k (1 - eta) S) = 0`,
//!
//! used as an independent check on tree convergence.
//!
//! The march runs backward from `V_T = max(redemption, k S)` on a uniform
//! spot grid. Space uses central differences, switching to a forward
//! (upwind) first derivative in cells where the central stencil would give a
//! negative off-diagonal weight. After every time step coupons are added with
//! the same survival-adjusted discounting as the tree and the provisions are
//! applied by projection, nodewise, with the tree's exercise rule.
//!
//! Boundaries: at `S = 0` the equation degenerates to the ODE
//! `V_t - (r + lambda) V + lambda R N = 0` (a power-law intensity is clamped to
//! its value at the first interior node); at `s_max` the value is `k S` while
//! conversion is allowed and `V_SS = 0` otherwise.

use crate::error::{PricingError, Result};
use crate::instrument::{year_fraction, ConvertibleTerms, Date};
use crate::lattice::{hull_diffusion, DefaultSpec, MarketState};
use crate::pricer::apply_provisions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler; unconditionally stable, first order in time.
    Implicit,
    CrankNicolson,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::Implicit => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeGrid {
    pub s_max: f64,
    pub n_space: usize,
    pub n_time: usize,
    pub scheme: Scheme,
}

impl PdeGrid {
    /// Grid reaching `5 * max(spot, N / k)`, with `k` the largest conversion
    /// ratio (or `N` alone for a bond that never converts).
    pub fn for_spot(
        terms: &ConvertibleTerms,
        spot: f64,
        n_space: usize,
        n_time: usize,
        scheme: Scheme,
    ) -> Self {
        let parity = terms
            .conversion
            .iter()
            .map(|c| c.ratio)
            .fold(None, |acc: Option<f64>, k| {
                Some(acc.map_or(k, |a| a.max(k)))
            })
            .map_or(terms.face, |k| terms.face / k);
        PdeGrid {
            s_max: 5.0 * spot.max(parity),
            n_space,
            n_time,
            scheme,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(PricingError::InvalidInput(format!(
                "grid s_max must be > 0, got {}",
                self.s_max
            )));
        }
        if self.n_space < 50 || self.n_time < 50 {
            return Err(PricingError::InvalidInput(format!(
                "grid needs at least 50 space and 50 time steps, got {} x {}",
                self.n_space, self.n_time
            )));
        }
        Ok(())
    }

    /// True when the grid reaches at least four times `spot`.
    pub fn covers(&self, spot: f64) -> bool {
        self.s_max >= 4.0 * spot
    }

    pub fn refined(&self) -> Self {
        PdeGrid {
            n_space: 2 * self.n_space,
            n_time: 2 * self.n_time,
            ..*self
        }
    }
}

/// Value function at the valuation date, sampled on the spot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub spots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PdeSolution {
    fn locate(&self, spot: f64) -> Result<(usize, f64)> {
        let h = self.spots[1] - self.spots[0];
        let last = *self.spots.last().expect("non-empty grid");
        if !(0.0..=last).contains(&spot) {
            return Err(PricingError::InvalidInput(format!(
                "spot {spot} is outside the grid [0, {last}]"
            )));
        }
        let i = ((spot / h).floor() as usize).min(self.spots.len() - 2);
        Ok((i, (spot - self.spots[i]) / h))
    }

    /// Linear interpolation of the value.
    pub fn value_at(&self, spot: f64) -> Result<f64> {
        let (i, w) = self.locate(spot)?;
        Ok((1.0 - w) * self.values[i] + w * self.values[i + 1])
    }

    /// Central-difference slope at the nearest interior node.
    pub fn delta_at(&self, spot: f64) -> Result<f64> {
        let (i, w) = self.locate(spot)?;
        let node = (if w < 0.5 { i } else { i + 1 }).clamp(1, self.spots.len() - 2);
        let h = self.spots[1] - self.spots[0];
        Ok((self.values[node + 1] - self.values[node - 1]) / (2.0 * h))
    }
}

/// Market and default inputs under which this solver reproduces the limit of
/// the total-default comparison tree: diffusion `sigma^2 - lambda`, full drop.
pub fn hull_equivalent(
    market: &MarketState,
    spec: &DefaultSpec,
) -> Result<(MarketState, DefaultSpec)> {
    let diffusion = hull_diffusion(market, spec.hazard.lambda0())?;
    Ok((
        MarketState {
            rate: market.rate,
            sigma: diffusion,
        },
        DefaultSpec {
            eta: 1.0,
            hazard: spec.hazard,
        },
    ))
}

/// Solves the pricing equation backward from maturity to `valuation`.
pub fn solve_afv(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    grid: &PdeGrid,
    valuation: Date,
) -> Result<PdeSolution> {
    terms.validate()?;
    market.validate()?;
    crate::lattice::validate_eta(spec.eta)?;
    spec.hazard.validate()?;
    grid.validate()?;
    if valuation < terms.issue_date || valuation >= terms.maturity_date {
        return Err(PricingError::InvalidInput(format!(
            "valuation date {valuation} must lie in [{}, {})",
            terms.issue_date, terms.maturity_date
        )));
    }

    let m = grid.n_space;
    let n = grid.n_time;
    let h = grid.s_max / m as f64;
    let dtau = year_fraction(valuation, terms.maturity_date) / n as f64;
    let theta = grid.scheme.theta();
    let (r, eta, sigma_sq) = (market.rate, spec.eta, market.sigma * market.sigma);
    let recovered = terms.recovery * terms.face;

    let spots: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let mut hazard = Vec::with_capacity(m + 1);
    hazard.push(0.0);
    for &s in &spots[1..] {
        hazard.push(spec.hazard.hazard_at(s)?);
    }
    hazard[0] = if spec.hazard.is_constant() {
        spec.hazard.lambda0()
    } else {
        hazard[1]
    };

    // Operator L V_i = lo_i V_{i-1} + di_i V_i + up_i V_{i+1} on interior rows;
    // row 0 carries only the reaction term.
    let mut lo = vec![0.0; m + 1];
    let mut di = vec![0.0; m + 1];
    let mut up = vec![0.0; m + 1];
    di[0] = -(r + hazard[0]);
    for i in 1..m {
        let x = i as f64;
        let diffusion = 0.5 * sigma_sq * x * x;
        let drift = (r + hazard[i] * eta) * x;
        let (l, u) = if diffusion - 0.5 * drift >= 0.0 {
            (diffusion - 0.5 * drift, diffusion + 0.5 * drift)
        } else {
            (diffusion, diffusion + drift)
        };
        lo[i] = l;
        up[i] = u;
        di[i] = -(l + u) - (r + hazard[i]);
    }

    let levels = terms.level_provisions(valuation, n);
    let coupons = terms.coupon_step_factors(valuation, n, r);
    let survival: Vec<f64> = hazard.iter().map(|l| (-l * dtau).exp()).collect();
    let source = |level: usize, i: usize| {
        let x = match levels[level].conversion_ratio {
            Some(k) => recovered.max(k * (1.0 - eta) * spots[i]),
            None => recovered,
        };
        hazard[i] * x
    };

    let mut values: Vec<f64> = spots
        .iter()
        .map(|&s| match levels[n].conversion_ratio {
            Some(k) => terms.redemption.max(k * s),
            None => terms.redemption,
        })
        .collect();

    let mut a = vec![0.0; m + 1];
    let mut b = vec![0.0; m + 1];
    let mut c = vec![0.0; m + 1];
    let mut rhs = vec![0.0; m + 1];
    let mut scratch = vec![0.0; m + 1];

    for level in (0..n).rev() {
        let explicit = 1.0 - theta;
        for i in 0..m {
            let mut lv = di[i] * values[i];
            if i > 0 {
                lv += lo[i] * values[i - 1] + up[i] * values[i + 1];
            }
            rhs[i] = values[i]
                + dtau
                    * (explicit * lv + theta * source(level, i) + explicit * source(level + 1, i));
            a[i] = -theta * dtau * lo[i];
            b[i] = 1.0 - theta * dtau * di[i];
            c[i] = -theta * dtau * up[i];
        }
        match levels[level].conversion_ratio {
            Some(k) => {
                a[m] = 0.0;
                b[m] = 1.0;
                rhs[m] = k * grid.s_max;
            }
            None => {
                // V_m - 2 V_{m-1} + V_{m-2} = 0, with V_{m-2} eliminated via row m-1.
                a[m] = -2.0 * a[m - 1] - b[m - 1];
                b[m] = a[m - 1] - c[m - 1];
                rhs[m] = -rhs[m - 1];
            }
        }
        c[m] = 0.0;
        solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch);
        std::mem::swap(&mut values, &mut rhs);

        let coupon = coupons[level];
        let provisions = &levels[level];
        for i in 0..=m {
            if coupon != 0.0 {
                values[i] += coupon * survival[i];
            }
            values[i] = apply_provisions(values[i], spots[i], provisions);
        }
    }

    Ok(PdeSolution { spots, values })
}

/// Solves on `grid` and on the grid refined twice in each direction, and
/// returns the refined value at `spot`. Fails with
/// [`PricingError::GridTooCoarse`] when the two differ by more than
/// `tolerance`.
pub fn solve_afv_refined(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    grid: &PdeGrid,
    valuation: Date,
    spot: f64,
    tolerance: f64,
) -> Result<f64> {
    if !grid.covers(spot) {
        return Err(PricingError::InvalidInput(format!(
            "grid s_max {} must be at least 4x the spot {spot}",
            grid.s_max
        )));
    }
    let coarse = solve_afv(terms, market, spec, grid, valuation)?.value_at(spot)?;
    let fine = solve_afv(terms, market, spec, &grid.refined(), valuation)?.value_at(spot)?;
    let change = (fine - coarse).abs();
    if change > tolerance {
        return Err(PricingError::GridTooCoarse { change, tolerance });
    }
    Ok(fine)
}

/// Time-extrapolated value at `spot`.
///
/// Solves with the implicit scheme on `grid`'s space steps and three time
/// grids `n_time`, `2 n_time`, `4 n_time`, then removes the leading time
/// error by geometric (Aitken) extrapolation. Fails with
/// [`PricingError::GridTooCoarse`] when the three values are not in the
/// asymptotic regime (successive changes must shrink by a ratio in `(0, 0.9]`)
/// and the last change exceeds `tolerance`.
pub fn extrapolated_value(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    grid: &PdeGrid,
    valuation: Date,
    spot: f64,
    tolerance: f64,
) -> Result<f64> {
    let mut values = [0.0; 3];
    for (k, v) in values.iter_mut().enumerate() {
        let fine = PdeGrid {
            n_time: grid.n_time << k,
            scheme: Scheme::Implicit,
            ..*grid
        };
        *v = solve_afv(terms, market, spec, &fine, valuation)?.value_at(spot)?;
    }
    let (first, second) = (values[1] - values[0], values[2] - values[1]);
    let ratio = second / first;
    if first != 0.0 && ratio > 0.0 && ratio <= 0.9 {
        return Ok(values[2] + second * ratio / (1.0 - ratio));
    }
    if second.abs() <= tolerance {
        return Ok(values[2]);
    }
    Err(PricingError::GridTooCoarse {
        change: second.abs(),
        tolerance,
    })
}

/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`; the
/// solution overwrites `d`. Requires a diagonally dominant system.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / denom;
        d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}
