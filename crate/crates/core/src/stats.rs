//! Pearson correlation with two-sided t-test p-values, signal trends and the
//! propaganda correlation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::communities::{CommunityAssignment, CoordinationScores};
use crate::error::{Error, Result};
use crate::measures::{community_members, delta, validate_grid, DeltaStat, TrendSeries};
use crate::scalar::Scalar;

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    let half = F::lit(0.5);
    if x < half {
        // reflection
        let pi = F::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut acc = F::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + F::lit(c) / (x + F::from_usize_lossy(i));
    }
    let t = x + F::lit(LANCZOS_G) + half;
    half * (F::lit(2.0) * F::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction<F: Scalar>(x: F, a: F, b: F) -> F {
    let tiny = F::lit(1e-300).max(F::min_positive_value());
    let eps = F::epsilon();
    let one = F::one();
    let two = F::lit(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=10_000usize {
        let m = F::from_usize_lossy(m);
        let m2 = two * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        h = h * delta;
        if (delta - one).abs() <= eps {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta<F: Scalar>(x: F, a: F, b: F) -> F {
    if x <= F::zero() {
        return F::zero();
    }
    if x >= F::one() {
        return F::one();
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (F::one() - x).ln();
    let front = ln_front.exp();
    if x < (a + F::one()) / (a + b + F::lit(2.0)) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        F::one() - front * beta_continued_fraction(F::one() - x, b, a) / b
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf<F: Scalar>(t: F, df: F) -> F {
    if t.is_infinite() {
        return if t > F::zero() { F::one() } else { F::zero() };
    }
    let x = df / (df + t * t);
    let tail = F::lit(0.5) * regularized_incomplete_beta(x, df / F::lit(2.0), F::lit(0.5));
    if t > F::zero() {
        F::one() - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| >= |t|)`.
pub fn student_t_two_sided_p<F: Scalar>(t: F, df: F) -> F {
    if t.is_infinite() {
        return F::zero();
    }
    regularized_incomplete_beta(df / (df + t * t), df / F::lit(2.0), F::lit(0.5)).min(F::one())
}

// ---------------------------------------------------------------------------
// Pearson correlation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pearson<F> {
    pub r: F,
    pub p: F,
    pub n: usize,
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::BadSeries(format!("lengths {} and {}", x.len(), y.len())));
    }
    let n = F::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx <= F::zero() || syy <= F::zero() {
        return Err(Error::ConstantSeries);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-F::one()).min(F::one()))
}

/// Pearson r with a two-sided p-value from `t = r sqrt((n-2)/(1-r^2))`, `n - 2` degrees of freedom.
pub fn pearson<F: Scalar>(x: &[F], y: &[F]) -> Result<Pearson<F>> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::BadSeries(format!(
            "need equal lengths of at least 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let r = pearson_r(x, y)?;
    let df = F::from_usize_lossy(x.len() - 2);
    let p = if r.abs() >= F::one() {
        F::zero()
    } else {
        let t = r * (df / (F::one() - r * r)).sqrt();
        student_t_two_sided_p(t, df)
    };
    Ok(Pearson { r, p, n: x.len() })
}

/// `***` for p < 0.01, `**` for p < 0.05, `*` for p < 0.1.
pub fn stars<F: Scalar>(p: F) -> &'static str {
    let p = p.as_f64();
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

// ---------------------------------------------------------------------------
// Signal trends
// ---------------------------------------------------------------------------

/// Mean per-user signal over members with coordination `>= k` that have a signal value.
pub fn signal_trend<F: Scalar>(
    signal: &BTreeMap<String, F>,
    coordination: &CoordinationScores<F>,
    assignment: &CommunityAssignment,
    community: usize,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    let members = community_members(assignment, community)?;
    signal_trend_for(&community.to_string(), &members, signal, coordination, grid)
}

/// [`signal_trend`] over an explicit member list.
pub fn signal_trend_for<F: Scalar>(
    name: &str,
    members: &[&str],
    signal: &BTreeMap<String, F>,
    coordination: &CoordinationScores<F>,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    validate_grid(grid)?;
    if !members.iter().any(|u| signal.contains_key(*u)) {
        return Err(Error::NoSignals(name.to_string()));
    }
    let mut series = TrendSeries::empty(name, grid);
    for (i, &k) in grid.iter().enumerate() {
        let vals: Vec<F> = members
            .iter()
            .filter(|u| coordination.score(u).is_some_and(|c| c >= k))
            .filter_map(|u| signal.get(*u).copied())
            .collect();
        series.users[i] = vals.len();
        series.items[i] = vals.len();
        series.values[i] = crate::scalar::mean(&vals);
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// Correlation report
// ---------------------------------------------------------------------------

/// Trends of one report row, all on one grid.
#[derive(Clone, Debug)]
pub struct CommunitySeries<F> {
    pub community: String,
    pub propaganda: TrendSeries<F>,
    pub automation: Option<TrendSeries<F>>,
    pub suspensions: Option<TrendSeries<F>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Coordination,
    Automation,
    Suspensions,
}

/// One report cell: a correlation or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell<F> {
    Value(Pearson<F>),
    Undefined(String),
}

impl<F: Scalar> Cell<F> {
    pub fn value(&self) -> Option<&Pearson<F>> {
        match self {
            Cell::Value(p) => Some(p),
            Cell::Undefined(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationEntry<F> {
    pub community: String,
    pub signal: Signal,
    pub r: F,
    pub p: F,
    pub stars: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow<F> {
    pub community: String,
    pub coordination: Cell<F>,
    pub automation: Cell<F>,
    pub suspensions: Cell<F>,
    pub delta: Option<DeltaStat<F>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport<F> {
    pub rows: Vec<CorrelationRow<F>>,
    pub overall: CorrelationRow<F>,
}

/// Correlates the defined points common to both series.
fn correlate<F: Scalar>(a: &TrendSeries<F>, b: &[Option<F>]) -> Cell<F> {
    let (x, y): (Vec<F>, Vec<F>) = a.values.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
    if x.len() < 3 {
        return Cell::Undefined(format!("{} common points", x.len()));
    }
    match pearson(&x, &y) {
        Ok(p) => Cell::Value(p),
        Err(e) => Cell::Undefined(e.to_string()),
    }
}

fn report_row<F: Scalar>(series: &CommunitySeries<F>, with_delta: bool) -> CorrelationRow<F> {
    let grid: Vec<Option<F>> = series.propaganda.grid.iter().map(|&k| Some(k)).collect();
    let against = |other: &Option<TrendSeries<F>>| match other {
        Some(t) if t.grid == series.propaganda.grid => correlate(&series.propaganda, &t.values),
        Some(_) => Cell::Undefined("grid mismatch".into()),
        None => Cell::Undefined("no signal".into()),
    };
    CorrelationRow {
        community: series.community.clone(),
        coordination: correlate(&series.propaganda, &grid),
        automation: against(&series.automation),
        suspensions: against(&series.suspensions),
        delta: if with_delta {
            delta(&series.propaganda).ok()
        } else {
            None
        },
    }
}

/// Propaganda trend versus (a) the coordination threshold itself, (b) automation
/// and (c) suspension trends, plus delta per community.
pub fn correlation_report<F: Scalar>(
    communities: &[CommunitySeries<F>],
    overall: &CommunitySeries<F>,
) -> CorrelationReport<F> {
    CorrelationReport {
        rows: communities.iter().map(|s| report_row(s, true)).collect(),
        overall: report_row(overall, false),
    }
}

fn cell_fields<F: Scalar>(c: &Cell<F>) -> [String; 3] {
    match c {
        Cell::Value(p) => [
            format!("{}", p.r.as_f64()),
            format!("{}", p.p.as_f64()),
            stars(p.p).to_string(),
        ],
        Cell::Undefined(_) => [String::new(), String::new(), String::new()],
    }
}

fn cell_text<F: Scalar>(c: &Cell<F>) -> String {
    match c {
        Cell::Value(p) => format!("{:+.3} {:<3}", p.r.as_f64(), stars(p.p)),
        Cell::Undefined(_) => format!("{:>6} {:<3}", "--", ""),
    }
}

impl<F: Scalar> CorrelationReport<F> {
    /// Flattened `(community, signal, r, p, stars)` entries for defined cells.
    pub fn entries(&self) -> Vec<CorrelationEntry<F>> {
        let mut out = Vec::new();
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            for (signal, cell) in [
                (Signal::Coordination, &row.coordination),
                (Signal::Automation, &row.automation),
                (Signal::Suspensions, &row.suspensions),
            ] {
                if let Cell::Value(p) = cell {
                    out.push(CorrelationEntry {
                        community: row.community.clone(),
                        signal,
                        r: p.r,
                        p: p.p,
                        stars: stars(p.p),
                    });
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "community,coordination_r,coordination_p,coordination_stars,automation_r,automation_p,automation_stars,suspensions_r,suspensions_p,suspensions_stars,delta,delta_pct\n",
        );
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let mut fields = vec![row.community.clone()];
            for c in [&row.coordination, &row.automation, &row.suspensions] {
                fields.extend(cell_fields(c));
            }
            match &row.delta {
                Some(d) => {
                    fields.push(format!("{}", d.delta.as_f64()));
                    fields.push(d.delta_pct.map(|p| format!("{}", p.as_f64())).unwrap_or_default());
                }
                None => fields.extend([String::new(), String::new()]),
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    /// Aligned table: r with significance stars per signal, then delta and its percentage.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.community.len())
            .chain([9, "overall".len()])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<10}  {:<10}  {:<10}  delta (%)",
            "community", "(a) coord", "(b) autom", "(c) susp"
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 2 + 12 * 3 + 18));
        let line = |out: &mut String, row: &CorrelationRow<F>| {
            let delta = match &row.delta {
                Some(d) => match d.delta_pct {
                    Some(p) => format!("{:+.3} ({:+.1}%)", d.delta.as_f64(), p.as_f64()),
                    None => format!("{:+.3} (--)", d.delta.as_f64()),
                },
                None => "--".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:<10}  {:<10}  {:<10}  {}",
                row.community,
                cell_text(&row.coordination),
                cell_text(&row.automation),
                cell_text(&row.suspensions),
                delta
            );
        };
        for row in &self.rows {
            line(&mut out, row);
        }
        line(&mut out, &self.overall);
        let _ = writeln!(out, "***: p < 0.01, **: p < 0.05, *: p < 0.1");
        out
    }
}
