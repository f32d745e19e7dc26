mod common;

use cbond::pde::{hull_equivalent, solve_afv, PdeGrid, Scheme};
use cbond::pricer::price;
use cbond::{ConvertibleTerms, DefaultSpec, HazardModel, MarketState, ModelKind};
use common::*;

fn value(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    grid: &PdeGrid,
    spot: f64,
) -> f64 {
    solve_afv(terms, market, spec, grid, terms.issue_date)
        .unwrap()
        .value_at(spot)
        .unwrap()
}

#[test]
fn higher_recovery_never_lowers_value() {
    let market = worked_market();
    for (eta, lambda) in [(1.0, 0.062), (0.4, 0.3), (0.0, 0.1)] {
        let spec = DefaultSpec::new(eta, HazardModel::constant(lambda).unwrap()).unwrap();
        let low = ConvertibleTerms::example_five_year();
        let mut high = low.clone();
        high.recovery = 0.6;
        let grid = PdeGrid::for_spot(&low, 50.0, 200, 200, Scheme::Implicit);
        let a = solve_afv(&low, &market, &spec, &grid, low.issue_date).unwrap();
        let b = solve_afv(&high, &market, &spec, &grid, high.issue_date).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(y >= x, "{y} < {x}");
        }
    }
}

#[test]
fn implicit_refinement_is_first_order() {
    let terms = ConvertibleTerms::example_five_year();
    let spec = constant_spec(0.062);
    let values: Vec<f64> = [200, 400, 800, 1600]
        .iter()
        .map(|&n| {
            value(
                &terms,
                &worked_market(),
                &spec,
                &PdeGrid::for_spot(&terms, 50.0, n, n, Scheme::Implicit),
                50.0,
            )
        })
        .collect();
    for w in values.windows(3) {
        let ratio = (w[2] - w[1]).abs() / (w[1] - w[0]).abs();
        assert!(ratio <= 0.5, "ratio {ratio}");
    }
}

#[test]
fn crank_nicolson_refinement_is_second_order_without_provisions() {
    let mut terms = ConvertibleTerms::example_five_year().without_provisions();
    terms.conversion.clear();
    let spec = constant_spec(0.062);
    let values: Vec<f64> = [100, 200, 400, 800]
        .iter()
        .map(|&n| {
            value(
                &terms,
                &worked_market(),
                &spec,
                &PdeGrid::for_spot(&terms, 50.0, n, n, Scheme::CrankNicolson),
                50.0,
            )
        })
        .collect();
    for w in values.windows(3) {
        let ratio = (w[2] - w[1]).abs() / (w[1] - w[0]).abs();
        assert!(ratio <= 0.3, "ratio {ratio}");
    }
}

#[test]
fn european_total_default_matches_closed_form() {
    let terms = european_convertible();
    let spec = constant_spec(0.062);
    let grid = PdeGrid::for_spot(&terms, 50.0, 800, 800, Scheme::CrankNicolson);
    let solution = solve_afv(&terms, &worked_market(), &spec, &grid, terms.issue_date).unwrap();
    for spot in [20.0, 50.0, 100.0, 150.0] {
        let exact =
            european_total_default(100.0, 1.0, 0.4, spot, 0.05, 0.25, 0.062, horizon(&terms));
        let got = solution.value_at(spot).unwrap();
        assert!((got - exact).abs() < 5e-3, "spot {spot}: {got} vs {exact}");
    }
}

#[test]
fn synthesis_zero_boundary_approaches_recovery() {
    // The S = 0 row uses the intensity at the first node, so it reaches R N
    // only as the spacing shrinks.
    let terms = ConvertibleTerms::example_five_year();
    let mut previous = f64::INFINITY;
    for n_space in [100, 400, 1600] {
        let grid = PdeGrid::for_spot(&terms, 50.0, n_space, 200, Scheme::Implicit);
        let at_zero = solve_afv(
            &terms,
            &worked_market(),
            &synthesis_spec(),
            &grid,
            terms.issue_date,
        )
        .unwrap()
        .values[0];
        assert!(
            at_zero > 40.0 && at_zero < previous,
            "{at_zero} after {previous}"
        );
        previous = at_zero;
    }
}

#[test]
fn hull_equivalent_agrees_with_comparison_tree() {
    let terms = ConvertibleTerms::example_five_year();
    let market = MarketState::new(0.05, 0.35).unwrap();
    let spec = constant_spec(0.062);
    let (m, s) = hull_equivalent(&market, &spec).unwrap();
    let pde = value(
        &terms,
        &m,
        &s,
        &PdeGrid::for_spot(&terms, 50.0, 800, 800, Scheme::Implicit),
        50.0,
    );
    let tree = price(
        &terms,
        &market,
        &spec,
        &config(&terms, 2000, 50.0, ModelKind::Hull2011),
    )
    .unwrap()
    .value;
    assert!((pde - tree).abs() < 0.1, "pde {pde} tree {tree}");
}

#[test]
fn table_bond_tree_within_tolerance_of_oracle() {
    let terms = ConvertibleTerms::example_five_year();
    let spec = constant_spec(0.062);
    let pde = value(
        &terms,
        &worked_market(),
        &spec,
        &PdeGrid::for_spot(&terms, 50.0, 800, 800, Scheme::Implicit),
        50.0,
    );
    let tree = price(
        &terms,
        &worked_market(),
        &spec,
        &config(&terms, 2000, 50.0, ModelKind::ConstantIntensity),
    )
    .unwrap()
    .value;
    assert!((pde - tree).abs() <= 0.1, "pde {pde} tree {tree}");
}
