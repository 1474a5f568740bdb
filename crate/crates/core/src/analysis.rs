//! Post-processing: per-round rates, confidence intervals, scaling fits,
//! teraquop projections, threshold crossings and detector autocorrelations.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::circuit::DetectorDef;
use crate::error::{Error, Result};
use crate::shots::ShotBatch;

/// Per-round logical error rate whose independent composition over `rounds`
/// rounds gives `p_l`. Rates above 1/2 saturate at 1/2.
pub fn per_round_rate(p_l: f64, rounds: usize) -> f64 {
    if p_l >= 0.5 {
        return 0.5;
    }
    let rounds = rounds.max(1) as f64;
    -0.5 * ((1.0 / rounds) * (-2.0 * p_l).ln_1p()).exp_m1()
}

/// Wilson score interval at 95% confidence.
pub fn confidence_interval(failures: u64, shots: u64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = shots as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if failures == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if failures == shots { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FitModel {
    /// `A·exp(-b·d)`
    Exponential,
    /// `A·d^(-b)`
    PowerLaw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub amplitude: f64,
    pub rate: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
}

impl FitResult {
    pub fn evaluate(&self, d: f64) -> f64 {
        match self.model {
            FitModel::Exponential => self.amplitude * (-self.rate * d).exp(),
            FitModel::PowerLaw => self.amplitude * d.powf(-self.rate),
        }
    }
}

/// Unweighted least squares of `ln p` against `d` (exponential) or `ln d`
/// (power law).
pub fn fit(points: &[(f64, f64)], model: FitModel) -> Result<FitResult> {
    fit_weighted(points, model, None)
}

/// Least squares with optional per-point weights (for example inverse
/// variances of `ln p`).
pub fn fit_weighted(points: &[(f64, f64)], model: FitModel, weights: Option<&[f64]>) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidInput("a fit needs at least three points".into()));
    }
    if let Some(w) = weights {
        if w.len() != points.len() || w.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("weights must be positive, one per point".into()));
        }
    }
    if let Some(&(d, p)) = points.iter().find(|&&(d, p)| !(p > 0.0) || !(d > 0.0)) {
        return Err(Error::InvalidInput(format!("cannot fit nonpositive point ({d}, {p})")));
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|&(d, _)| match model {
            FitModel::Exponential => d,
            FitModel::PowerLaw => d.ln(),
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|&(_, p)| p.ln()).collect();
    let ws: Vec<f64> = weights.map_or_else(|| vec![1.0; points.len()], <[f64]>::to_vec);
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit needs at least two distinct distances".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).zip(&ws).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        model,
        amplitude: intercept.exp(),
        rate: -slope,
        residual,
    })
}

/// Target per-round logical error rate of the teraquop regime.
pub const TERAQUOP_RATE: f64 = 1e-12;
/// Projections beyond this distance are not considered realistic.
pub const TERAQUOP_CAP: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Teraquop {
    Distance(u32),
    /// The fit decreases, but only reaches the target beyond the cap.
    Unrealistic,
    /// The fit does not decrease with distance.
    Never,
}

/// Smallest odd distance (at least 3) at which the fit is at most 10⁻¹².
pub fn teraquop_distance(fit: &FitResult) -> Teraquop {
    if !(fit.rate > 0.0) {
        return Teraquop::Never;
    }
    let ratio = (fit.amplitude / TERAQUOP_RATE).ln();
    let real = match fit.model {
        FitModel::Exponential => ratio / fit.rate,
        FitModel::PowerLaw => (ratio / fit.rate).exp(),
    };
    if !(real <= f64::from(TERAQUOP_CAP)) {
        return Teraquop::Unrealistic;
    }
    let mut d = (real.ceil().max(3.0)) as u32;
    if d.is_multiple_of(2) {
        d += 1;
    }
    // Guard against rounding at the crossing.
    while d > 3 && fit.evaluate(f64::from(d - 2)) <= TERAQUOP_RATE {
        d -= 2;
    }
    while fit.evaluate(f64::from(d)) > TERAQUOP_RATE {
        d += 2;
    }
    if d > TERAQUOP_CAP {
        Teraquop::Unrealistic
    } else {
        Teraquop::Distance(d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdEstimate {
    Crossing {
        median: f64,
        min: f64,
        max: f64,
        /// `(d1, d2, p)` for every pairwise crossing found.
        crossings: Vec<(u32, u32, f64)>,
    },
    /// No pair of curves crosses inside the sampled range.
    Open,
}

/// Crossing points of per-distance `(p, p_L)` curves.
///
/// Each pair of distances is compared on their common `p` values; between
/// consecutive points where the larger distance goes from better to worse,
/// the crossing is located by linear interpolation of `ln p_L` in `ln p`.
pub fn threshold_estimate(curves: &[(u32, Vec<(f64, f64)>)]) -> Result<ThresholdEstimate> {
    if curves.len() < 2 {
        return Err(Error::InvalidInput("threshold estimation needs at least two distances".into()));
    }
    let mut crossings = Vec::new();
    for (a, (d1, c1)) in curves.iter().enumerate() {
        for (d2, c2) in &curves[a + 1..] {
            let (small, large, ds, dl) = if d1 < d2 { (c1, c2, *d1, *d2) } else { (c2, c1, *d2, *d1) };
            let lookup: BTreeMap<u64, f64> = large.iter().map(|&(p, pl)| (p.to_bits(), pl)).collect();
            let mut common: Vec<(f64, f64)> = small
                .iter()
                .filter(|&&(p, pl)| p > 0.0 && pl > 0.0)
                .filter_map(|&(p, pl)| {
                    let other = *lookup.get(&p.to_bits())?;
                    (other > 0.0).then(|| (p.ln(), other.ln() - pl.ln()))
                })
                .collect();
            common.sort_by(|x, y| x.0.total_cmp(&y.0));
            for w in common.windows(2) {
                let ((x0, g0), (x1, g1)) = (w[0], w[1]);
                if g0 < 0.0 && g1 >= 0.0 {
                    let x = if g1 == g0 { x1 } else { x0 + (x1 - x0) * g0 / (g0 - g1) };
                    crossings.push((ds, dl, x.exp()));
                }
            }
        }
    }
    if crossings.is_empty() {
        return Ok(ThresholdEstimate::Open);
    }
    let mut ps: Vec<f64> = crossings.iter().map(|c| c.2).collect();
    ps.sort_by(f64::total_cmp);
    let mid = ps.len() / 2;
    let median = if ps.len() % 2 == 1 { ps[mid] } else { 0.5 * (ps[mid - 1] + ps[mid]) };
    Ok(ThresholdEstimate::Crossing {
        median,
        min: ps[0],
        max: ps[ps.len() - 1],
        crossings,
    })
}

/// Pearson correlation of two bit rows over `shots` shots, or `None` if
/// either row is constant.
pub fn pearson(a: &[u64], b: &[u64], shots: usize) -> Option<f64> {
    let n = shots as f64;
    let ca = a.iter().map(|w| w.count_ones() as f64).sum::<f64>();
    let cb = b.iter().map(|w| w.count_ones() as f64).sum::<f64>();
    let cab = a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as f64).sum::<f64>();
    let (fa, fb) = (ca / n, cb / n);
    let var = fa * (1.0 - fa) * fb * (1.0 - fb);
    if var <= 0.0 {
        return None;
    }
    Some((cab / n - fa * fb) / var.sqrt())
}

/// Same-site detector autocorrelation averaged over sites, per round pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AutocorrMatrix {
    /// Detector rounds covered, ascending.
    pub rounds: Vec<u32>,
    /// Row-major `rounds.len()²` matrix; the diagonal is 1.
    pub values: Vec<f64>,
    /// Number of sites averaged for each entry.
    pub sites: Vec<usize>,
    /// Detectors that never or always fired; their correlations count as 0.
    pub constant_detectors: Vec<u32>,
    pub shots: usize,
}

impl AutocorrMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.rounds.len() + j]
    }

    /// Mean off-diagonal value at each round separation of at least 2.
    pub fn curve(&self) -> Vec<(u32, f64)> {
        let r = self.rounds.len();
        let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for i in 0..r {
            for j in i + 1..r {
                let sep = self.rounds[j] - self.rounds[i];
                if sep >= 2 {
                    let e = sums.entry(sep).or_insert((0.0, 0));
                    e.0 += self.get(i, j);
                    e.1 += 1;
                }
            }
        }
        sums.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
    }

    /// CSV lines `t,t',value` for every round pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,t_prime,value\n");
        for (i, &t) in self.rounds.iter().enumerate() {
            for (j, &u) in self.rounds.iter().enumerate() {
                out.push_str(&format!("{t},{u},{}\n", self.get(i, j)));
            }
        }
        out
    }
}

/// Autocorrelation of detection events between rounds at the same site.
///
/// Entry `(t, t')` is the mean over syndrome sites having detectors in both
/// rounds of the Pearson correlation between those two detectors.
pub fn autocorrelation(batch: &ShotBatch, detectors: &[DetectorDef]) -> Result<AutocorrMatrix> {
    if batch.shot_count() < 2 {
        return Err(Error::InvalidInput("autocorrelation needs at least two shots".into()));
    }
    if detectors.len() != batch.detector_count() {
        return Err(Error::InvalidInput(format!(
            "{} detector definitions for {} detectors",
            detectors.len(),
            batch.detector_count()
        )));
    }
    let rounds: Vec<u32> = {
        let mut r: Vec<u32> = detectors.iter().map(|d| d.round).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let index_of = |round: u32| rounds.binary_search(&round).unwrap();
    let mut by_site: BTreeMap<u32, Vec<(usize, u32)>> = BTreeMap::new();
    for (i, d) in detectors.iter().enumerate() {
        by_site.entry(d.syndrome).or_default().push((index_of(d.round), i as u32));
    }
    let shots = batch.shot_count();
    let constant_detectors: Vec<u32> = (0..detectors.len())
        .filter(|&d| {
            let c = batch.fire_count(d);
            c == 0 || c == shots as u64
        })
        .map(|d| d as u32)
        .collect();

    let r = rounds.len();
    let site_sums: Vec<(Vec<f64>, Vec<usize>)> = by_site
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|members| {
            let mut sum = vec![0.0; r * r];
            let mut count = vec![0usize; r * r];
            for (a, &(ta, da)) in members.iter().enumerate() {
                for &(tb, db) in &members[a + 1..] {
                    let c = pearson(batch.detector_row(da as usize), batch.detector_row(db as usize), shots)
                        .unwrap_or(0.0);
                    for idx in [ta * r + tb, tb * r + ta] {
                        sum[idx] += c;
                        count[idx] += 1;
                    }
                }
            }
            (sum, count)
        })
        .collect();

    let mut values = vec![0.0; r * r];
    let mut sites = vec![0usize; r * r];
    for (sum, count) in site_sums {
        for i in 0..r * r {
            values[i] += sum[i];
            sites[i] += count[i];
        }
    }
    for i in 0..r * r {
        if sites[i] > 0 {
            values[i] /= sites[i] as f64;
        }
    }
    for i in 0..r {
        values[i * r + i] = 1.0;
    }
    Ok(AutocorrMatrix {
        rounds,
        values,
        sites,
        constant_detectors,
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_round_examples() {
        assert_eq!(per_round_rate(0.0, 10), 0.0);
        assert!((per_round_rate(0.123, 1) - 0.123).abs() < 1e-15);
        assert_eq!(per_round_rate(0.7, 3), 0.5);
        // Forward composition of independent per-round flips.
        for &(pl, n) in &[(0.01, 6), (0.3, 22), (1e-7, 30)] {
            let pr = per_round_rate(pl, n);
            let composed = (1.0 - (1.0 - 2.0 * pr).powi(n as i32)) / 2.0;
            assert!((composed - pl).abs() < 1e-12);
        }
    }

    #[test]
    fn wilson_examples() {
        assert_eq!(confidence_interval(0, 100).0, 0.0);
        assert_eq!(confidence_interval(100, 100).1, 1.0);
        // Independent evaluation of the Wilson formula at p = 1/2, n = 100.
        let (lo, hi) = confidence_interval(50, 100);
        let half = 1.96 * (0.25 / 100.0 + 1.96f64.powi(2) / 40000.0).sqrt() / (1.0 + 1.96f64.powi(2) / 100.0);
        assert!((lo - (0.5 - half)).abs() < 1e-12 && (hi - (0.5 + half)).abs() < 1e-12);
        assert!((lo - 0.404).abs() < 1e-3 && (hi - 0.596).abs() < 1e-3);
    }

    fn synthetic(model: FitModel, a: f64, b: f64) -> Vec<(f64, f64)> {
        let f = FitResult { model, amplitude: a, rate: b, residual: 0.0 };
        (3..=15).step_by(2).map(|d| (d as f64, f.evaluate(d as f64))).collect()
    }

    #[test]
    fn fits_recover_exact_models() {
        let e = fit(&synthetic(FitModel::Exponential, 4.03e-3, 0.820), FitModel::Exponential).unwrap();
        assert!((e.amplitude / 4.03e-3 - 1.0).abs() < 1e-9 && (e.rate - 0.820).abs() < 1e-9);
        assert!(e.residual < 1e-10);
        let p = fit(&synthetic(FitModel::PowerLaw, 9.51e-3, 2.35), FitModel::PowerLaw).unwrap();
        assert!((p.amplitude / 9.51e-3 - 1.0).abs() < 1e-9 && (p.rate - 2.35).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (3..=9).step_by(2).map(|d| (d as f64, 1e-3)).collect();
        assert!(fit(&flat, FitModel::Exponential).unwrap().rate.abs() < 1e-12);
        assert!(fit(&[(3.0, 0.0), (5.0, 1e-3), (7.0, 1e-4)], FitModel::Exponential).is_err());
    }

    #[test]
    fn teraquop_examples() {
        let exp = |a, b| FitResult { model: FitModel::Exponential, amplitude: a, rate: b, residual: 0.0 };
        assert_eq!(teraquop_distance(&exp(1.46e-2, 0.713)), Teraquop::Distance(33));
        assert_eq!(teraquop_distance(&exp(2.51e-3, 0.595)), Teraquop::Distance(37));
        let pow = FitResult { model: FitModel::PowerLaw, amplitude: 9.51e-3, rate: 2.35, residual: 0.0 };
        assert_eq!(teraquop_distance(&pow), Teraquop::Unrealistic);
        assert_eq!(teraquop_distance(&exp(1e-3, 0.0)), Teraquop::Never);
        assert_eq!(teraquop_distance(&exp(1e-3, -0.1)), Teraquop::Never);
    }

    #[test]
    fn teraquop_is_monotone_in_rate() {
        let mut last = u32::MAX;
        for i in 1..200 {
            let f = FitResult { model: FitModel::Exponential, amplitude: 1e-2, rate: 0.1 * i as f64, residual: 0.0 };
            if let Teraquop::Distance(d) = teraquop_distance(&f) {
                assert!(d <= last);
                assert!(d % 2 == 1 && f.evaluate(d as f64) <= 1e-12);
                last = d;
            }
        }
    }

    #[test]
    fn synthetic_crossing() {
        // p_L = (p / p_th)^((d+1)/2) crosses exactly at p_th.
        let pth = 0.006;
        let grid: Vec<f64> = (0..9).map(|i| 0.002 + 0.001 * i as f64).collect();
        let curves: Vec<(u32, Vec<(f64, f64)>)> = [3u32, 5, 7]
            .iter()
            .map(|&d| (d, grid.iter().map(|&p| (p, 0.1 * (p / pth).powf((d as f64 + 1.0) / 2.0))).collect()))
            .collect();
        match threshold_estimate(&curves).unwrap() {
            ThresholdEstimate::Crossing { median, crossings, .. } => {
                assert_eq!(crossings.len(), 3);
                assert!((median - pth).abs() < 1e-9);
            }
            ThresholdEstimate::Open => panic!("expected a crossing"),
        }
        let far: Vec<(u32, Vec<(f64, f64)>)> = [3u32, 5]
            .iter()
            .map(|&d| (d, grid.iter().map(|&p| (p, (p / 0.1).powf(d as f64))).collect()))
            .collect();
        assert_eq!(threshold_estimate(&far).unwrap(), ThresholdEstimate::Open);
    }

    #[test]
    fn pearson_of_copies_is_one() {
        let row = [0b1011_0010u64, 0x0F0F];
        assert!((pearson(&row, &row, 128).unwrap() - 1.0).abs() < 1e-12);
        let inverted: Vec<u64> = row.iter().map(|w| !w).collect();
        assert!((pearson(&row, &inverted, 128).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[0, 0], &row, 128), None);
    }
}
