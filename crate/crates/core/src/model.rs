//! Population dynamics and harvesting economics.
//!
//! Stocks are in 10^6 pounds, money in dollars and effort in 10^3
//! skate-soaks. Cost integrals of the marginal harvest cost are anchored at
//! a reference stock (`Grid::x_ref`) because for elasticities `b >= 1` the
//! integral from zero diverges. Only differences of [`revenue_rel`] enter
//! utilities, so the anchor never changes a decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape contract for a reproduction map `f(escapement, shock)`.
///
/// Implementations must be nondecreasing in both arguments and concave in
/// the escapement for every shock. The solvers rely on monotonicity in the
/// shock for the worst-shock shortcut.
pub trait Reproduction {
    fn next_stock(&self, escapement: f64, shock: f64) -> f64;

    /// Inclusive support `[lo, hi]` of the shock.
    fn shock_support(&self) -> (f64, f64);
}

/// Beverton-Holt reproduction with a multiplicative shock on recruitment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BioModel {
    pub mortality: f64,
    pub r0: f64,
    pub half_saturation: f64,
    pub shock_lo: f64,
    pub shock_hi: f64,
}

impl BioModel {
    pub fn new(
        mortality: f64,
        r0: f64,
        half_saturation: f64,
        shock_lo: f64,
        shock_hi: f64,
    ) -> Result<Self> {
        let bio = BioModel {
            mortality,
            r0,
            half_saturation,
            shock_lo,
            shock_hi,
        };
        bio.validate()?;
        Ok(bio)
    }

    /// Pacific halibut, IPHC Area 3A base case.
    pub fn table1() -> Self {
        BioModel {
            mortality: 0.15,
            r0: 0.543365,
            half_saturation: 196.3923,
            shock_lo: 1.0 - 0.11,
            shock_hi: 1.0 + 0.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("mortality", self.mortality),
            ("r0", self.r0),
            ("half_saturation", self.half_saturation),
            ("shock_lo", self.shock_lo),
            ("shock_hi", self.shock_hi),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if !(0.0..1.0).contains(&self.mortality) {
            return Err(Error::invalid("mortality", "must lie in [0, 1)"));
        }
        if self.r0 <= 0.0 {
            return Err(Error::invalid("r0", "must be positive"));
        }
        if self.half_saturation <= 0.0 {
            return Err(Error::invalid("half_saturation", "must be positive"));
        }
        if self.shock_lo <= 0.0 {
            return Err(Error::invalid("shock_lo", "must be positive"));
        }
        if self.shock_hi < self.shock_lo {
            return Err(Error::invalid("shock_hi", "must be >= shock_lo"));
        }
        if self.shock_lo * self.r0 <= self.mortality {
            return Err(Error::invalid(
                "shock_lo",
                "shock_lo * r0 must exceed mortality (worst-case stock collapses otherwise)",
            ));
        }
        Ok(())
    }

    /// Checked version of the reproduction map.
    pub fn recruit(&self, escapement: f64, shock: f64) -> Result<f64> {
        if !(escapement >= 0.0) {
            return Err(Error::Domain(format!(
                "escapement must be nonnegative, got {escapement}"
            )));
        }
        self.check_shock(shock)?;
        Ok(self.next_stock(escapement, shock))
    }

    fn check_shock(&self, shock: f64) -> Result<()> {
        if !(shock >= self.shock_lo && shock <= self.shock_hi) {
            return Err(Error::Domain(format!(
                "shock {shock} outside support [{}, {}]",
                self.shock_lo, self.shock_hi
            )));
        }
        Ok(())
    }

    /// Positive fixed point of `s -> recruit(s, shock)`.
    pub fn carrying_capacity(&self, shock: f64) -> Result<CarryingCapacity> {
        self.check_shock(shock)?;
        Ok(self.fixed_point(shock))
    }

    fn fixed_point(&self, shock: f64) -> CarryingCapacity {
        let gain = shock * self.r0 - self.mortality;
        if gain <= 0.0 {
            CarryingCapacity {
                stock: 0.0,
                collapsed: true,
            }
        } else {
            CarryingCapacity {
                stock: self.half_saturation * gain / self.mortality,
                collapsed: false,
            }
        }
    }
}

impl Reproduction for BioModel {
    #[inline]
    fn next_stock(&self, escapement: f64, shock: f64) -> f64 {
        (1.0 - self.mortality) * escapement
            + shock * self.r0 * escapement / (1.0 + escapement / self.half_saturation)
    }

    fn shock_support(&self) -> (f64, f64) {
        (self.shock_lo, self.shock_hi)
    }
}

/// Fixed point of the reproduction map. `collapsed` is set when no positive
/// fixed point exists, in which case `stock` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarryingCapacity {
    pub stock: f64,
    pub collapsed: bool,
}

/// Prices, costs and discounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconModel {
    /// $ per 10^6 pounds.
    pub price: f64,
    /// $ per harvesting season in which any harvest happens.
    pub fixed_cost: f64,
    /// $ per 10^3 skate-soaks.
    pub effort_cost: f64,
    pub catchability: f64,
    pub elasticity: f64,
    pub discount_rate: f64,
}

impl EconModel {
    pub fn new(
        price: f64,
        fixed_cost: f64,
        effort_cost: f64,
        catchability: f64,
        elasticity: f64,
        discount_rate: f64,
    ) -> Result<Self> {
        let econ = EconModel {
            price,
            fixed_cost,
            effort_cost,
            catchability,
            elasticity,
            discount_rate,
        };
        econ.validate()?;
        Ok(econ)
    }

    pub fn table1() -> Self {
        EconModel {
            price: 4.3e6,
            fixed_cost: 5.0e6,
            effort_cost: 2.0e5,
            catchability: 9.07979e-7,
            elasticity: 2.55465,
            discount_rate: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("price", self.price),
            ("fixed_cost", self.fixed_cost),
            ("effort_cost", self.effort_cost),
            ("catchability", self.catchability),
            ("elasticity", self.elasticity),
            ("discount_rate", self.discount_rate),
        ];
        for (field, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, "must be finite and positive"));
            }
        }
        Ok(())
    }

    /// `alpha = 1 / (1 + discount_rate)`.
    pub fn discount_factor(&self) -> f64 {
        1.0 / (1.0 + self.discount_rate)
    }

    /// True when the effort integral diverges at zero stock.
    pub fn cost_diverges_at_zero(&self) -> bool {
        self.elasticity >= 1.0
    }

    /// Antiderivative of `1 / (q y^b)`. Equals zero at `y = 0` when `b < 1`.
    fn effort_antiderivative(&self, y: f64) -> f64 {
        let b = self.elasticity;
        let q = self.catchability;
        if b == 1.0 {
            y.ln() / q
        } else {
            y.powf(1.0 - b) / (q * (1.0 - b))
        }
    }

    /// Signed integral of `1 / (q y^b)` from `from` to `to`.
    pub(crate) fn effort_between(&self, from: f64, to: f64) -> f64 {
        self.effort_antiderivative(to) - self.effort_antiderivative(from)
    }
}

/// Marginal harvest cost `g(x) = c / (q x^b)` in $ per 10^6 pounds.
pub fn marginal_cost(stock: f64, econ: &EconModel) -> Result<f64> {
    if !(stock > 0.0) {
        return Err(Error::Domain(format!(
            "marginal cost needs a positive stock, got {stock}"
        )));
    }
    Ok(econ.effort_cost / (econ.catchability * stock.powf(econ.elasticity)))
}

/// Effort needed to bring the stock from `stock_before` down by `harvest`.
pub fn effort(stock_before: f64, harvest: f64, econ: &EconModel) -> Result<f64> {
    if !(harvest >= 0.0) || !(stock_before >= 0.0) {
        return Err(Error::Domain(format!(
            "harvest {harvest} and stock {stock_before} must be nonnegative"
        )));
    }
    if harvest > stock_before {
        return Err(Error::Domain(format!(
            "harvest {harvest} exceeds stock {stock_before}"
        )));
    }
    if harvest == 0.0 {
        return Ok(0.0);
    }
    let remaining = stock_before - harvest;
    if remaining <= 0.0 && econ.cost_diverges_at_zero() {
        return Err(Error::Domain(
            "exhausting the stock needs infinite effort when elasticity >= 1".into(),
        ));
    }
    Ok(econ.effort_between(remaining, stock_before))
}

/// Stock at which the marginal cost equals the price.
pub fn zero_profit_level(econ: &EconModel) -> f64 {
    (econ.effort_cost / (econ.catchability * econ.price)).powf(1.0 / econ.elasticity)
}

/// Revenue potential relative to the reference stock `x_ref`:
/// `p (x - x_ref) - c * integral_{x_ref}^{x} 1/(q y^b) dy`.
pub fn revenue_rel(stock: f64, grid: &Grid, econ: &EconModel) -> Result<f64> {
    if !(stock >= 0.0) || (stock == 0.0 && econ.cost_diverges_at_zero()) {
        return Err(Error::Domain(format!(
            "revenue is undefined at stock {stock}"
        )));
    }
    Ok(revenue_unchecked(stock, grid.x_ref, econ))
}

#[inline]
pub(crate) fn revenue_unchecked(stock: f64, x_ref: f64, econ: &EconModel) -> f64 {
    econ.price * (stock - x_ref) - econ.effort_cost * econ.effort_between(x_ref, stock)
}

/// Net utility of harvesting `harvest` out of `stock`, fixed cost included.
pub fn harvest_utility(stock: f64, harvest: f64, grid: &Grid, econ: &EconModel) -> Result<f64> {
    if !(harvest >= 0.0) || harvest > stock {
        return Err(Error::Domain(format!(
            "harvest {harvest} not admissible for stock {stock}"
        )));
    }
    if harvest == 0.0 {
        return Ok(0.0);
    }
    let after = stock - harvest;
    Ok(revenue_rel(stock, grid, econ)? - revenue_rel(after, grid, econ)? - econ.fixed_cost)
}

/// Evenly spaced stock grid `0, step, 2 step, ..., x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_max: f64,
    pub step: f64,
    pub x_ref: f64,
}

impl Grid {
    /// Grid with the reference level at one step.
    pub fn new(x_max: f64, step: f64) -> Result<Self> {
        Self::with_reference(x_max, step, step)
    }

    pub fn with_reference(x_max: f64, step: f64, x_ref: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid("step", "must be finite and positive"));
        }
        if !(x_max.is_finite() && x_max >= 2.0 * step) {
            return Err(Error::invalid("x_max", "must be at least two grid steps"));
        }
        if !(x_ref > 0.0 && x_ref <= x_max) {
            return Err(Error::invalid("x_ref", "must lie in (0, x_max]"));
        }
        Ok(Grid { x_max, step, x_ref })
    }

    /// Grid whose top node is the best-case carrying capacity rounded up to
    /// the next node. No trajectory started below it can leave the grid.
    pub fn for_model(bio: &BioModel, step: f64) -> Result<Self> {
        let cap = bio.fixed_point(bio.shock_hi).stock;
        let nodes = (cap / step - 1e-9).ceil().max(2.0);
        Self::new(nodes * step, step)
    }

    pub fn validate(&self) -> Result<()> {
        Self::with_reference(self.x_max, self.step, self.x_ref).map(|_| ())
    }

    pub fn len(&self) -> usize {
        (self.x_max / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Largest node value.
    pub fn top(&self) -> f64 {
        self.node(self.len() - 1)
    }
}

/// Number of seasons in the planning problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Horizon(usize);

impl Horizon {
    pub fn new(periods: usize) -> Result<Self> {
        if periods == 0 {
            return Err(Error::invalid("horizon", "must be at least one period"));
        }
        Ok(Horizon(periods))
    }

    pub fn periods(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Horizon {
    type Error = Error;
    fn try_from(v: usize) -> Result<Self> {
        Horizon::new(v)
    }
}

impl From<Horizon> for usize {
    fn from(h: Horizon) -> usize {
        h.0
    }
}
