//! The printed Tukey tables for the four elevation bins, recomputed from the
//! printed residual sums of squares and group sizes.

use terrablock_core::stats::{tukey_from_anova, AnovaResult, GroupSummary, SeConvention, TukeyResult};

const SIZES: [usize; 4] = [270, 1294, 781, 53];
const LABELS: [&str; 4] = ["(213.919, 215.335]", "(215.335, 215.775]", "(215.775, 216.215]", "(216.215, 217.14]"];

/// (mean diff, p-adj, ci low, ci high, reject) in pair order.
type Row = (f64, f64, f64, f64, bool);

const TABLE_2015: [Row; 6] = [
    (11.33, 0.00, 8.61, 14.04, true),
    (14.09, 0.00, 11.23, 16.96, true),
    (8.38, 0.00, 2.28, 14.47, true),
    (2.76, 0.00, 0.93, 4.60, true),
    (-2.95, 0.37, -8.64, 2.74, false),
    (-5.72, 0.01, -11.48, 0.04, false),
];

const TABLE_2021: [Row; 6] = [
    (6.49, 0.00, 4.38, 8.61, true),
    (8.38, 0.00, 6.15, 10.62, true),
    (12.43, 0.00, 7.67, 17.18, true),
    (1.89, 0.00, 0.46, 3.32, true),
    (5.93, 0.00, 1.50, 10.37, true),
    (4.04, 0.03, -0.45, 8.53, false),
];

/// Group means anchored at 0 for the first bin, taken from the first three rows.
fn tukey(rows: &[Row; 6], residual_ss: f64, convention: SeConvention) -> TukeyResult {
    let means = [0.0, rows[0].0, rows[1].0, rows[2].0];
    let df_within = SIZES.iter().sum::<usize>() - 4;
    let msw = residual_ss / df_within as f64;
    let groups = (0..4)
        .map(|i| GroupSummary {
            label: LABELS[i].to_string(),
            n: SIZES[i],
            mean: means[i],
            variance: None,
        })
        .collect();
    let anova = AnovaResult {
        ssb: 1.0,
        ssw: residual_ss,
        sst: residual_ss + 1.0,
        df_between: 3,
        df_within,
        msb: 1.0 / 3.0,
        msw,
        f: 0.0,
        p_value: 1.0,
        r_squared: 0.0,
        groups,
    };
    tukey_from_anova(&anova, 0.01, convention).unwrap()
}

fn half_width_error(t: &TukeyResult, rows: &[Row; 6]) -> f64 {
    t.pairs
        .iter()
        .zip(rows)
        .map(|(p, r)| ((p.ci_high - p.ci_low) / 2.0 - (r.3 - r.2) / 2.0).abs())
        .fold(0.0, f64::max)
}

fn check_kramer_reproduces(rows: &[Row; 6], residual_ss: f64) {
    let t = tukey(rows, residual_ss, SeConvention::Kramer);
    assert_eq!(t.df_within, 2394);
    for (p, r) in t.pairs.iter().zip(rows) {
        // the remaining three differences follow from the first three
        assert!((p.mean_diff - r.0).abs() < 0.02, "{} vs {}", p.mean_diff, r.0);
        assert!((p.ci_low - r.2).abs() < 0.03 && (p.ci_high - r.3).abs() < 0.03, "{p:?} vs {r:?}");
        assert!((p.p_adj - r.1).abs() < 0.006, "p {} vs {}", p.p_adj, r.1);
        assert_eq!(p.reject, r.4);
    }
    assert!(half_width_error(&t, rows) < 0.01);
}

#[test]
fn table_4_follows_the_kramer_standard_error() {
    check_kramer_reproduces(&TABLE_2015, 4.06e5);
}

#[test]
fn table_6_follows_the_kramer_standard_error() {
    check_kramer_reproduces(&TABLE_2021, 2.47e5);
}

#[test]
fn written_formula_widens_printed_intervals_by_root_two() {
    for (rows, ss) in [(&TABLE_2015, 4.06e5), (&TABLE_2021, 2.47e5)] {
        let paper = tukey(rows, ss, SeConvention::Paper);
        let kramer = tukey(rows, ss, SeConvention::Kramer);
        assert!(half_width_error(&paper, rows) > 0.5);
        for (p, k) in paper.pairs.iter().zip(&kramer.pairs) {
            assert!((p.se / k.se - 2f64.sqrt()).abs() < 1e-12);
        }
    }
}
