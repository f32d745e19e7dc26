//! Command-line front end.
//!
//! Failures print `error: TOKEN: message` on stderr and exit with status 2.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cbond::config::parse_terms;
use cbond::instrument::year_fraction;
use cbond::lattice::{
    build_step_params, hull_diffusion, hull_max_hazard_step, hull_step_params_checked,
    max_hazard_step,
};
use cbond::pde::{extrapolated_value, hull_equivalent, PdeGrid, Scheme};
use cbond::pricer::{price, price_profile};
use cbond::{
    ConvertibleTerms, Date, DefaultSpec, HazardModel, MarketState, ModelKind, PricingConfig,
    PricingError,
};

#[derive(Parser)]
#[command(
    name = "cbond",
    version,
    about = "Convertible bond pricing on a defaultable-stock tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value the bond at one spot.
    Price(Common),
    /// Price profile over a spot grid, as CSV.
    Profile(Common),
    /// Tree values over a doubling ladder of step counts against a reference.
    Converge(ConvergeArgs),
    /// Constant-intensity and comparison-tree values side by side, as CSV.
    CompareHull(Common),
    /// Step parameters and hazard-step diagnostics for one tree step.
    ValidateStep(StepArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Term-sheet file.
    #[arg(long)]
    terms: PathBuf,
    /// constant, synthesis or hull.
    #[arg(long, default_value = "constant")]
    model: ModelKind,
    #[arg(long)]
    spot: Option<f64>,
    /// Evenly spaced spots `lo:hi:n`, both ends included.
    #[arg(long)]
    spot_grid: Option<String>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0.062)]
    lambda0: f64,
    /// Exponent of the equity-linked intensity.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    alpha: f64,
    /// Spot at which the equity-linked intensity equals lambda0.
    #[arg(long, default_value_t = 50.0)]
    s0: f64,
    /// Fractional stock drop on default.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    r: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Overrides the term sheet's recovery rate.
    #[arg(long)]
    recovery: Option<f64>,
    /// Valuation date (defaults to the issue date).
    #[arg(long)]
    valuation: Option<Date>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    /// Space steps of the finite-difference reference.
    #[arg(long, default_value_t = 1600)]
    pde_space: usize,
    /// Coarsest of the three time grids of the reference.
    #[arg(long, default_value_t = 12800)]
    pde_time: usize,
}

#[derive(Args)]
struct StepArgs {
    #[command(flatten)]
    common: Common,
    /// Step length in years; defaults to the bond's life over `--steps`.
    #[arg(long)]
    dt: Option<f64>,
}

struct Failure {
    token: &'static str,
    message: String,
}

impl From<PricingError> for Failure {
    fn from(e: PricingError) -> Self {
        Failure {
            token: e.token(),
            message: e.to_string(),
        }
    }
}

fn failure(token: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        token,
        message: message.into(),
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Everything a command needs, validated before any computation.
struct Run {
    terms: ConvertibleTerms,
    market: MarketState,
    spec: DefaultSpec,
    model: ModelKind,
    steps: usize,
    valuation: Date,
}

impl Run {
    fn load(c: &Common) -> Outcome<Run> {
        let text = std::fs::read_to_string(&c.terms).map_err(|e| {
            failure(
                "IO_ERROR",
                format!("cannot read term sheet {}: {e}", c.terms.display()),
            )
        })?;
        let mut terms = parse_terms(&text)
            .map_err(|e| failure("CONFIG_ERROR", format!("{}: {e}", c.terms.display())))?;
        if let Some(recovery) = c.recovery {
            terms.recovery = recovery;
            terms.validate()?;
        }
        let market = MarketState::new(c.r, c.sigma)?;
        let hazard = match c.model {
            ModelKind::Synthesis => HazardModel::power(c.lambda0, c.alpha, c.s0)?,
            _ => HazardModel::constant(c.lambda0)?,
        };
        let spec = DefaultSpec::new(c.eta, hazard)?;
        if c.steps == 0 {
            return Err(failure("INVALID_INPUT", "--steps must be at least 1"));
        }
        Ok(Run {
            valuation: c.valuation.unwrap_or(terms.issue_date),
            terms,
            market,
            spec,
            model: c.model,
            steps: c.steps,
        })
    }

    fn config(&self, steps: usize, spot: f64) -> PricingConfig {
        PricingConfig {
            n_steps: steps,
            model: self.model,
            spot,
            valuation_date: self.valuation,
        }
    }

    fn with_model(&self, model: ModelKind) -> Run {
        Run {
            terms: self.terms.clone(),
            model,
            ..*self
        }
    }
}

fn spots(c: &Common) -> Outcome<Vec<f64>> {
    match (c.spot, &c.spot_grid) {
        (Some(s), None) => Ok(vec![s]),
        (None, Some(grid)) => parse_grid(grid),
        (None, None) => Err(failure("INVALID_INPUT", "give --spot or --spot-grid")),
        (Some(_), Some(_)) => Err(failure(
            "INVALID_INPUT",
            "give --spot or --spot-grid, not both",
        )),
    }
}

fn parse_grid(text: &str) -> Outcome<Vec<f64>> {
    let bad = || {
        failure(
            "INVALID_INPUT",
            format!("--spot-grid expects lo:hi:n, got '{text}'"),
        )
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi || (n == 1 && lo != hi) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * h })
        .collect())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| failure("IO_ERROR", format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn optional(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn cmd_price(c: &Common) -> Outcome<()> {
    let run = Run::load(c)?;
    let spot = c
        .spot
        .ok_or_else(|| failure("INVALID_INPUT", "price needs --spot"))?;
    let result = price(
        &run.terms,
        &run.market,
        &run.spec,
        &run.config(run.steps, spot),
    )?;
    let mut line = format!(
        "model={} spot={} steps={} value={} delta={} step_margin={} floor={} floor_extended={} clamped_nodes={}",
        run.model.name(),
        spot,
        run.steps,
        result.value,
        result.delta,
        result.step_margin,
        optional(result.floor),
        result.floor_extended,
        result.clamped_nodes,
    );
    if run.spec.hazard.lambda0() == 0.0 {
        line.push_str(" mode=crr-equivalent");
    }
    line.push('\n');
    emit(&c.out, &line)
}

fn cmd_profile(c: &Common) -> Outcome<()> {
    let run = Run::load(c)?;
    let grid = spots(c)?;
    let config = run.config(run.steps, grid[0].max(f64::MIN_POSITIVE));
    let rows = price_profile(&run.terms, &run.market, &run.spec, &config, &grid)?;
    let mut csv = String::from("spot,value,delta,floor_extended,model\n");
    for (spot, r) in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            spot,
            r.value,
            r.delta,
            r.floor_extended,
            run.model.name()
        );
    }
    emit(&c.out, &csv)
}

/// Reference value for the ladder: closed-form discounting for a bond with
/// no optionality and constant intensity, else the extrapolated PDE value.
fn reference(run: &Run, spot: f64, pde_space: usize, pde_time: usize) -> Outcome<f64> {
    let t = &run.terms;
    let plain = t.conversion.is_empty() && t.calls.is_empty() && t.puts.is_empty();
    if plain && run.spec.hazard.is_constant() && run.model != ModelKind::Hull2011 {
        let (r, lambda) = (run.market.rate, run.spec.hazard.lambda0());
        let k = r + lambda;
        let horizon = year_fraction(run.valuation, t.maturity_date);
        let recovered = t.recovery * t.face;
        let recovery_leg = if k > 0.0 {
            recovered * lambda / k * -(-k * horizon).exp_m1()
        } else {
            0.0
        };
        let coupons: f64 = t
            .coupon_times(run.valuation)
            .iter()
            .map(|&(time, amount)| amount * (-k * time).exp())
            .sum();
        return Ok(t.redemption * (-k * horizon).exp() + coupons + recovery_leg);
    }
    let (market, spec) = match run.model {
        ModelKind::Hull2011 => hull_equivalent(&run.market, &run.spec)?,
        _ => (run.market, run.spec),
    };
    let grid = PdeGrid::for_spot(t, spot, pde_space, pde_time, Scheme::Implicit);
    Ok(extrapolated_value(
        t,
        &market,
        &spec,
        &grid,
        run.valuation,
        spot,
        1e-3,
    )?)
}

fn cmd_converge(a: &ConvergeArgs) -> Outcome<()> {
    let c = &a.common;
    let run = Run::load(c)?;
    let spot = c
        .spot
        .ok_or_else(|| failure("INVALID_INPUT", "converge needs --spot"))?;
    if run.model == ModelKind::Hull2011 {
        hull_diffusion(&run.market, run.spec.hazard.lambda0())?;
    }
    let mut ladder = vec![125usize];
    while ladder.last().unwrap() * 2 <= run.steps {
        ladder.push(ladder.last().unwrap() * 2);
    }
    let target = reference(&run, spot, a.pde_space, a.pde_time)?;
    let values = ladder
        .par_iter()
        .map(|&n| price(&run.terms, &run.market, &run.spec, &run.config(n, spot)).map(|r| r.value))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("n_steps,tree_value,abs_error\n");
    for (n, v) in ladder.iter().zip(values) {
        let _ = writeln!(csv, "{},{},{}", n, v, (v - target).abs());
    }
    eprintln!("reference={target}");
    emit(&c.out, &csv)
}

fn cmd_compare_hull(c: &Common) -> Outcome<()> {
    let base = Run::load(c)?;
    let grid = spots(c)?;
    let constant = base.with_model(ModelKind::ConstantIntensity);
    let hull = base.with_model(ModelKind::Hull2011);
    let rows = grid
        .par_iter()
        .map(|&spot| {
            let a = price(
                &constant.terms,
                &constant.market,
                &constant.spec,
                &constant.config(base.steps, spot),
            )?;
            let b = price(
                &hull.terms,
                &hull.market,
                &hull.spec,
                &hull.config(base.steps, spot),
            )?;
            Ok((spot, a.value, b.value))
        })
        .collect::<Result<Vec<_>, PricingError>>()?;
    let mut csv = String::from("spot,constant,hull,hull_minus_constant\n");
    for (spot, a, b) in rows {
        let _ = writeln!(csv, "{},{},{},{}", spot, a, b, b - a);
    }
    emit(&c.out, &csv)
}

fn cmd_validate_step(a: &StepArgs) -> Outcome<()> {
    let c = &a.common;
    let run = Run::load(c)?;
    let dt = match a.dt {
        Some(dt) => dt,
        None => year_fraction(run.valuation, run.terms.maturity_date) / run.steps as f64,
    };
    let lambda = run.spec.hazard.lambda0();
    let eta = run.spec.eta;
    let (step, bound) = match run.model {
        ModelKind::Hull2011 => (
            hull_step_params_checked(&run.market, lambda, dt)?,
            hull_max_hazard_step(&run.market, lambda, dt)?,
        ),
        _ => (
            build_step_params(&run.market, eta, lambda, dt)?,
            max_hazard_step(&run.market, eta, dt)?,
        ),
    };
    let mut report = String::new();
    let _ = writeln!(report, "model={} dt={}", run.model.name(), dt);
    let _ = writeln!(report, "up={} down={}", step.up, step.down);
    let _ = writeln!(
        report,
        "p_up={} p_down={} p_default={}",
        step.p_up, step.p_down, step.p_default
    );
    let _ = writeln!(
        report,
        "hazard_step={} max_hazard_step={} margin={}",
        lambda * dt,
        bound,
        bound - lambda * dt
    );
    if run.model == ModelKind::Synthesis {
        let floor = run.spec.hazard.stock_floor(&run.market, eta, dt)?;
        let _ = writeln!(report, "floor={}", optional(floor));
    }
    emit(&c.out, &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Price(c) => cmd_price(c),
        Command::Profile(c) => cmd_profile(c),
        Command::Converge(a) => cmd_converge(a),
        Command::CompareHull(c) => cmd_compare_hull(c),
        Command::ValidateStep(a) => cmd_validate_step(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.token, f.message);
            ExitCode::from(2)
        }
    }
}
