//! Convertible bond term sheet and schedules.
//!
//! Dates are whole days counted from 1970-01-01 (proleptic Gregorian); year
//! fractions are Act/365 fixed and no business-day adjustment is applied.
//!
//! Call and put prices are flat amounts: accrued interest is not added. Coupons
//! reach the holder through the valuation engines' coupon mechanism instead.

use std::fmt;
use std::str::FromStr;

use crate::error::{PricingError, Result};

/// Days per year under Act/365 fixed.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Calendar date as a day count from 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date(pub i64);

impl Date {
    /// Builds a date from year, month (1-12) and day, rejecting impossible
    /// combinations such as 2009-02-29.
    pub fn from_ymd(year: i64, month: u32, day: u32) -> Result<Date> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(PricingError::InvalidInput(format!(
                "invalid calendar date {year:04}-{month:02}-{day:02}"
            )));
        }
        Ok(Date(days_from_civil(year, month, day)))
    }

    pub fn ymd(self) -> (i64, u32, u32) {
        civil_from_days(self.0)
    }

    /// Same day-of-month `months` later (or earlier, when negative), clamped
    /// to the end of shorter months.
    pub fn add_months(self, months: i64) -> Date {
        let (y, m, d) = self.ymd();
        let total = y * 12 + (m as i64 - 1) + months;
        let year = total.div_euclid(12);
        let month = (total.rem_euclid(12) + 1) as u32;
        let day = d.min(days_in_month(year, month));
        Date(days_from_civil(year, month, day))
    }

    pub fn days_until(self, later: Date) -> i64 {
        later.0 - self.0
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, m, d) = self.ymd();
        write!(f, "{y:04}-{m:02}-{d:02}")
    }
}

impl FromStr for Date {
    type Err = PricingError;

    /// Parses ISO-8601 `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Date> {
        let bad = || PricingError::InvalidInput(format!("expected YYYY-MM-DD date, got {s:?}"));
        let mut parts = s.trim().splitn(3, '-');
        let (y, m, d) = (
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
        );
        if y.len() != 4 || m.len() != 2 || d.len() != 2 {
            return Err(bad());
        }
        let year = y.parse::<i64>().map_err(|_| bad())?;
        let month = m.parse::<u32>().map_err(|_| bad())?;
        let day = d.parse::<u32>().map_err(|_| bad())?;
        Date::from_ymd(year, month, day)
    }
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

// Era-based conversion between civil dates and day counts.
fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let m = month as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

/// Act/365 fixed year fraction.
pub fn year_fraction(start: Date, end: Date) -> f64 {
    start.days_until(end) as f64 / DAYS_PER_YEAR
}

/// Closed date interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Date,
    pub end: Date,
}

impl Window {
    pub fn new(start: Date, end: Date) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, date: Date) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionPeriod {
    pub window: Window,
    /// Shares received per bond.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallPeriod {
    pub window: Window,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutDate {
    pub date: Date,
    pub price: f64,
}

/// Provisions in force at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Provisions {
    pub conversion_ratio: Option<f64>,
    pub call_price: Option<f64>,
    pub put_price: Option<f64>,
}

impl Provisions {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Full convertible bond term sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertibleTerms {
    /// Face value `N`; recovery applies to it.
    pub face: f64,
    /// Amount paid at maturity absent default and conversion. Usually the face.
    pub redemption: f64,
    /// Annual coupon rate.
    pub coupon_rate: f64,
    /// Coupon payment dates, strictly increasing.
    pub coupon_dates: Vec<Date>,
    pub conversion: Vec<ConversionPeriod>,
    pub calls: Vec<CallPeriod>,
    pub puts: Vec<PutDate>,
    /// Recovery fraction of face on default.
    pub recovery: f64,
    pub issue_date: Date,
    pub maturity_date: Date,
}

impl ConvertibleTerms {
    /// Five-year 8% semi-annual convertible issued 2009-01-06: convertible
    /// into one share throughout, callable at 110 from 2011-01-06, puttable at
    /// 105 on 2012-01-06, 40% recovery.
    pub fn example_five_year() -> Self {
        let date = |y, m, d| Date::from_ymd(y, m, d).expect("valid literal date");
        let issue = date(2009, 1, 6);
        let maturity = date(2014, 1, 6);
        ConvertibleTerms {
            face: 100.0,
            redemption: 100.0,
            coupon_rate: 0.08,
            coupon_dates: coupon_schedule(issue, maturity, 6),
            conversion: vec![ConversionPeriod {
                window: Window::new(issue, maturity),
                ratio: 1.0,
            }],
            calls: vec![CallPeriod {
                window: Window::new(date(2011, 1, 6), maturity),
                price: 110.0,
            }],
            puts: vec![PutDate {
                date: date(2012, 1, 6),
                price: 105.0,
            }],
            recovery: 0.4,
            issue_date: issue,
            maturity_date: maturity,
        }
    }

    /// The same bond stripped of calls, puts and coupons; conversion kept.
    pub fn without_provisions(&self) -> Self {
        ConvertibleTerms {
            coupon_rate: 0.0,
            coupon_dates: Vec::new(),
            calls: Vec::new(),
            puts: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(PricingError::InvalidInput(msg));
        if self.issue_date >= self.maturity_date {
            return fail(format!(
                "issue date {} must precede maturity {}",
                self.issue_date, self.maturity_date
            ));
        }
        if !(self.face > 0.0 && self.face.is_finite()) {
            return fail(format!("face must be > 0, got {}", self.face));
        }
        if !(self.redemption >= 0.0 && self.redemption.is_finite()) {
            return fail(format!("redemption must be >= 0, got {}", self.redemption));
        }
        if !(self.coupon_rate >= 0.0 && self.coupon_rate.is_finite()) {
            return fail(format!(
                "coupon rate must be >= 0, got {}",
                self.coupon_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.recovery) {
            return fail(format!(
                "recovery must lie in [0, 1], got {}",
                self.recovery
            ));
        }
        let life = Window::new(self.issue_date, self.maturity_date);
        let in_life = |d: Date, what: &str| -> Result<()> {
            if life.contains(d) {
                Ok(())
            } else {
                Err(PricingError::InvalidInput(format!(
                    "{what} date {d} lies outside [{}, {}]",
                    self.issue_date, self.maturity_date
                )))
            }
        };
        for pair in self.coupon_dates.windows(2) {
            if pair[0] >= pair[1] {
                return fail(format!(
                    "coupon dates must be strictly increasing ({} then {})",
                    pair[0], pair[1]
                ));
            }
        }
        for &d in &self.coupon_dates {
            in_life(d, "coupon")?;
            if d == self.issue_date {
                return fail(format!("coupon date {d} coincides with the issue date"));
            }
        }
        let check_window = |w: &Window, what: &str| -> Result<()> {
            in_life(w.start, what)?;
            in_life(w.end, what)?;
            if w.start > w.end {
                return Err(PricingError::InvalidInput(format!(
                    "{what} window starts {} after it ends {}",
                    w.start, w.end
                )));
            }
            Ok(())
        };
        for c in &self.conversion {
            check_window(&c.window, "conversion")?;
            if !(c.ratio > 0.0 && c.ratio.is_finite()) {
                return fail(format!("conversion ratio must be > 0, got {}", c.ratio));
            }
        }
        for c in &self.calls {
            check_window(&c.window, "call")?;
            if !(c.price > 0.0 && c.price.is_finite()) {
                return fail(format!("call price must be > 0, got {}", c.price));
            }
        }
        for p in &self.puts {
            in_life(p.date, "put")?;
            if !(p.price > 0.0 && p.price.is_finite()) {
                return fail(format!("put price must be > 0, got {}", p.price));
            }
        }
        Ok(())
    }

    /// Coupon cash flows: `rate * yearfrac(previous, date) * face`, accruing
    /// from the issue date for the first coupon.
    pub fn coupon_amounts(&self) -> Vec<(Date, f64)> {
        let mut previous = self.issue_date;
        self.coupon_dates
            .iter()
            .map(|&date| {
                let amount = self.coupon_rate * year_fraction(previous, date) * self.face;
                previous = date;
                (date, amount)
            })
            .collect()
    }

    /// Provisions whose window (or exact date, for puts) contains `date`.
    /// When windows overlap the first listed entry wins.
    pub fn provisions_at(&self, date: Date) -> Provisions {
        Provisions {
            conversion_ratio: self
                .conversion
                .iter()
                .find(|c| c.window.contains(date))
                .map(|c| c.ratio),
            call_price: self
                .calls
                .iter()
                .find(|c| c.window.contains(date))
                .map(|c| c.price),
            put_price: self.puts.iter().find(|p| p.date == date).map(|p| p.price),
        }
    }

    /// Provisions on a uniform time grid of `n_steps` steps spanning
    /// `[valuation, maturity]`. Every schedule date is snapped to the nearest
    /// level (ties round up); windows cover all levels between their snapped
    /// endpoints.
    pub fn level_provisions(&self, valuation: Date, n_steps: usize) -> Vec<Provisions> {
        let grid = LevelGrid::new(valuation, self.maturity_date, n_steps);
        let mut levels = vec![Provisions::none(); n_steps + 1];
        let window_levels = |w: &Window| {
            let lo = grid.snap(w.start).max(0);
            let hi = grid.snap(w.end).min(n_steps as i64);
            lo..=hi
        };
        for c in &self.conversion {
            for i in window_levels(&c.window) {
                levels[i as usize].conversion_ratio.get_or_insert(c.ratio);
            }
        }
        for c in &self.calls {
            for i in window_levels(&c.window) {
                levels[i as usize].call_price.get_or_insert(c.price);
            }
        }
        for p in &self.puts {
            let i = grid.snap(p.date);
            if (0..=n_steps as i64).contains(&i) && p.date >= valuation {
                levels[i as usize].put_price.get_or_insert(p.price);
            }
        }
        levels
    }

    /// Coupons paid strictly after `valuation`, as (years from valuation, amount).
    pub fn coupon_times(&self, valuation: Date) -> Vec<(f64, f64)> {
        self.coupon_amounts()
            .into_iter()
            .filter(|&(date, _)| date > valuation)
            .map(|(date, amount)| (year_fraction(valuation, date), amount))
            .collect()
    }
}

impl ConvertibleTerms {
    /// For a uniform grid of `n_steps` steps from `valuation` to maturity:
    /// per step `i`, the sum of `c * exp(-r (t_c - t_i))` over coupons booked
    /// in that step. Survival over the step is left to the caller.
    ///
    /// A coupon is booked in the step ending at the level nearest its date
    /// (the first step if that level is the valuation date itself), so that a
    /// provision snapped to the same level is exercised after the coupon is
    /// paid. Discounting still uses the exact payment date.
    pub fn coupon_step_factors(&self, valuation: Date, n_steps: usize, rate: f64) -> Vec<f64> {
        let grid = LevelGrid::new(valuation, self.maturity_date, n_steps);
        let mut factors = vec![0.0; n_steps];
        for (date, amount) in self.coupon_amounts() {
            let days = valuation.days_until(date);
            if days <= 0 {
                continue;
            }
            let step = (grid.snap(date) - 1).max(0);
            let step_start = step as f64 * grid.total_days as f64 / n_steps as f64;
            let offset = (days as f64 - step_start) / DAYS_PER_YEAR;
            factors[step as usize] += amount * (-rate * offset).exp();
        }
        factors
    }
}

/// Coupon dates rolled backward from maturity in steps of `months`,
/// keeping only dates strictly after issue. A short first period results
/// when the life is not a whole number of periods.
pub fn coupon_schedule(issue: Date, maturity: Date, months: u32) -> Vec<Date> {
    let mut dates = Vec::new();
    let mut k = 0i64;
    loop {
        let date = maturity.add_months(-k * months as i64);
        if date <= issue {
            break;
        }
        dates.push(date);
        k += 1;
    }
    dates.reverse();
    dates
}

/// Maps calendar dates onto the levels `0..=n_steps` of a uniform grid.
#[derive(Debug, Clone, Copy)]
struct LevelGrid {
    valuation: Date,
    total_days: i64,
    n_steps: i64,
}

impl LevelGrid {
    fn new(valuation: Date, maturity: Date, n_steps: usize) -> Self {
        Self {
            valuation,
            total_days: valuation.days_until(maturity),
            n_steps: n_steps as i64,
        }
    }

    /// Nearest level in exact integer arithmetic, `round(days * n / total)`.
    fn snap(&self, date: Date) -> i64 {
        let days = self.valuation.days_until(date);
        (2 * days * self.n_steps + self.total_days).div_euclid(2 * self.total_days)
    }
}
