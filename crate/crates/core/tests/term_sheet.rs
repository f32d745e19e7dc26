use cbond::config::{parse_terms, serialize_terms};
use cbond::instrument::{
    coupon_schedule, year_fraction, CallPeriod, ConversionPeriod, ConvertibleTerms, Date, PutDate,
    Window,
};
use chrono::{Datelike, NaiveDate};
use proptest::prelude::*;

fn date_in(lo: i64, hi: i64) -> impl Strategy<Value = Date> {
    (lo..=hi).prop_map(Date)
}

fn terms() -> impl Strategy<Value = ConvertibleTerms> {
    (10_000i64..20_000, 200i64..4000).prop_flat_map(|(issue, life)| {
        let maturity = issue + life;
        (
            1e-3f64..1e4,
            0.0f64..2.0,
            0.0f64..0.2,
            prop::sample::select(vec![0u32, 1, 3, 6, 12]),
            0.0f64..=1.0,
            prop::collection::vec((date_in(issue, maturity), 0i64..2000, 0.01f64..10.0), 0..3),
            prop::collection::vec((date_in(issue, maturity), 0i64..2000, 1.0f64..200.0), 0..3),
            prop::collection::vec((date_in(issue, maturity), 1.0f64..200.0), 0..3),
        )
            .prop_map(
                move |(face, redemption, coupon, months, recovery, conv, calls, puts)| {
                    let (issue, maturity) = (Date(issue), Date(maturity));
                    let clamp =
                        |d: Date, len: i64| Window::new(d, Date((d.0 + len).min(maturity.0)));
                    ConvertibleTerms {
                        face,
                        redemption: redemption * face,
                        coupon_rate: if months == 0 { 0.0 } else { coupon },
                        coupon_dates: if months == 0 {
                            Vec::new()
                        } else {
                            coupon_schedule(issue, maturity, months)
                        },
                        conversion: conv
                            .into_iter()
                            .map(|(d, len, ratio)| ConversionPeriod {
                                window: clamp(d, len),
                                ratio,
                            })
                            .collect(),
                        calls: calls
                            .into_iter()
                            .map(|(d, len, price)| CallPeriod {
                                window: clamp(d, len),
                                price,
                            })
                            .collect(),
                        puts: puts
                            .into_iter()
                            .map(|(date, price)| PutDate { date, price })
                            .collect(),
                        recovery,
                        issue_date: issue,
                        maturity_date: maturity,
                    }
                },
            )
    })
}

proptest! {
    #[test]
    fn serialized_sheet_parses_back(t in terms()) {
        prop_assert!(t.validate().is_ok());
        let text = serialize_terms(&t);
        prop_assert_eq!(parse_terms(&text).unwrap(), t);
    }

    #[test]
    fn civil_dates_agree_with_chrono(days in -200_000i64..200_000) {
        let ours = Date(days);
        let theirs = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(days);
        let (y, m, d) = ours.ymd();
        prop_assert_eq!((y, m, d), (theirs.year() as i64, theirs.month(), theirs.day()));
        prop_assert_eq!(ours.to_string(), theirs.format("%Y-%m-%d").to_string());
        prop_assert_eq!(ours.to_string().parse::<Date>().unwrap(), ours);
    }

    #[test]
    fn coupon_amounts_add_up(t in terms()) {
        let total: f64 = t.coupon_amounts().iter().map(|c| c.1).sum();
        let accrual = match t.coupon_dates.last() {
            Some(&last) => year_fraction(t.issue_date, last),
            None => 0.0,
        };
        let expected = t.coupon_rate * t.face * accrual;
        prop_assert!((total - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}

#[test]
fn sample_sheet_is_the_worked_example() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../sample/five_year.terms"
    ))
    .unwrap();
    assert_eq!(
        parse_terms(&text).unwrap(),
        ConvertibleTerms::example_five_year()
    );
}
