//! Top-1 accuracy, harmonic mean and Borda-count comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::datasets::FeatureSet;
use crate::error::{Error, Result};
use crate::fusion::SemanticSet;
use crate::types::{ClassId, Mode, Role, Variation};

/// Anything that maps a feature vector to one of the candidate classes.
pub trait Predictor {
    fn predict(&self, z: &[f64], candidates: &[ClassId]) -> Result<ClassId>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Mean of per-class accuracies.
    #[default]
    PerClass,
    /// Fraction of correct samples.
    PerSample,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::PerClass => "per-class",
            Averaging::PerSample => "per-sample",
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Averaging {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-class" | "macro" => Ok(Averaging::PerClass),
            "per-sample" | "micro" => Ok(Averaging::PerSample),
            _ => Err(Error::contract(format!("unknown averaging {s:?}"))),
        }
    }
}

fn check_lengths(predictions: &[ClassId], labels: &[ClassId]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Mean over `classes` of the within-class hit rate, in percent. Classes with
/// no samples are left out of the mean.
pub fn per_class_top1(predictions: &[ClassId], labels: &[ClassId], classes: &[ClassId]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    let mut tally: BTreeMap<ClassId, (usize, usize)> = classes.iter().map(|&c| (c, (0, 0))).collect();
    for (p, l) in predictions.iter().zip(labels) {
        let t = tally
            .get_mut(l)
            .ok_or_else(|| Error::contract(format!("label {l} is not in the class set")))?;
        t.1 += 1;
        if p == l {
            t.0 += 1;
        }
    }
    let rates: Vec<f64> = tally
        .values()
        .filter(|(_, n)| *n > 0)
        .map(|&(hit, n)| hit as f64 / n as f64)
        .collect();
    if rates.is_empty() {
        return Err(Error::contract("every class in the set has zero samples"));
    }
    Ok(100.0 * rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Plain sample accuracy in percent.
pub fn per_sample_top1(predictions: &[ClassId], labels: &[ClassId]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    if labels.is_empty() {
        return Err(Error::contract("no samples"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * hits as f64 / labels.len() as f64)
}

pub fn top1(predictions: &[ClassId], labels: &[ClassId], classes: &[ClassId], averaging: Averaging) -> Result<f64> {
    match averaging {
        Averaging::PerClass => per_class_top1(predictions, labels, classes),
        Averaging::PerSample => {
            if let Some(l) = labels.iter().find(|l| !classes.contains(l)) {
                return Err(Error::contract(format!("label {l} is not in the class set")));
            }
            per_sample_top1(predictions, labels)
        }
    }
}

/// `2 s u / (s + u)`, zero when both are zero.
pub fn harmonic_mean(acc_s: f64, acc_u: f64) -> f64 {
    if acc_s + acc_u == 0.0 {
        0.0
    } else {
        2.0 * acc_s * acc_u / (acc_s + acc_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Acc,
    AccSeen,
    AccUnseen,
    Hm,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Acc, Metric::AccSeen, Metric::AccUnseen, Metric::Hm];

    pub fn header(self) -> &'static str {
        match self {
            Metric::Acc => "Acc",
            Metric::AccSeen => "Acc_s",
            Metric::AccUnseen => "Acc_u",
            Metric::Hm => "HM",
        }
    }
}

/// Metrics of one variation; any subset may be populated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variation: Variation,
    pub averaging: Averaging,
    pub acc: Option<f64>,
    pub acc_seen: Option<f64>,
    pub acc_unseen: Option<f64>,
    pub hm: Option<f64>,
    pub borda: u32,
}

impl EvalReport {
    pub fn new(variation: Variation, averaging: Averaging) -> Self {
        EvalReport {
            variation,
            averaging,
            acc: None,
            acc_seen: None,
            acc_unseen: None,
            hm: None,
            borda: 0,
        }
    }

    /// Set the GZSL pair and derive HM from it.
    pub fn with_gzsl(mut self, acc_seen: f64, acc_unseen: f64) -> Self {
        self.acc_seen = Some(acc_seen);
        self.acc_unseen = Some(acc_unseen);
        self.hm = Some(harmonic_mean(acc_seen, acc_unseen));
        self
    }

    pub fn with_acc(mut self, acc: f64) -> Self {
        self.acc = Some(acc);
        self
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Acc => self.acc,
            Metric::AccSeen => self.acc_seen,
            Metric::AccUnseen => self.acc_unseen,
            Metric::Hm => self.hm,
        }
    }

    pub fn populated(&self) -> Vec<Metric> {
        Metric::ALL.into_iter().filter(|&m| self.metric(m).is_some()).collect()
    }

    /// Fold another report of the same variation into this one.
    pub fn merge(&mut self, other: &EvalReport) -> Result<()> {
        if other.variation != self.variation || other.averaging != self.averaging {
            return Err(Error::contract("merging reports of different runs"));
        }
        self.acc = other.acc.or(self.acc);
        self.acc_seen = other.acc_seen.or(self.acc_seen);
        self.acc_unseen = other.acc_unseen.or(self.acc_unseen);
        self.hm = other.hm.or(self.hm);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.populated() {
            let v = self.metric(m).unwrap_or_default();
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::contract(format!("{} = {v} is outside [0, 100]", m.header())));
            }
        }
        if self.hm.is_some() != (self.acc_seen.is_some() && self.acc_unseen.is_some()) {
            return Err(Error::contract(
                "HM must be present exactly when both seen and unseen accuracy are",
            ));
        }
        Ok(())
    }
}

/// One point per metric to every variation that reaches the column maximum.
pub fn borda_count(reports: &[EvalReport]) -> Result<Vec<u32>> {
    if reports.len() < 2 {
        return Err(Error::contract("Borda count needs at least two variations"));
    }
    let metrics = reports[0].populated();
    if reports.iter().any(|r| r.populated() != metrics) {
        return Err(Error::contract("variations report different metric sets"));
    }
    let mut points = vec![0u32; reports.len()];
    for m in metrics {
        let col: Vec<f64> = reports.iter().map(|r| r.metric(m).unwrap_or_default()).collect();
        let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (p, v) in points.iter_mut().zip(&col) {
            if *v == best {
                *p += 1;
            }
        }
    }
    Ok(points)
}

/// Fill the `borda` field of every report.
pub fn assign_borda(reports: &mut [EvalReport]) -> Result<()> {
    let points = borda_count(reports)?;
    for (r, p) in reports.iter_mut().zip(points) {
        r.borda = p;
    }
    Ok(())
}

/// Ground truth and prediction for every evaluated test sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionLog {
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    /// Row index in the test set.
    pub index: usize,
    pub label: ClassId,
    pub prediction: ClassId,
    pub role: Role,
}

impl PredictionLog {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,label,prediction,role")?;
        for e in &self.entries {
            let role = match e.role {
                Role::Seen => "seen",
                Role::Unseen => "unseen",
            };
            writeln!(w, "{},{},{},{role}", e.index, e.label, e.prediction)?;
        }
        Ok(())
    }

    fn split(&self, role: Role) -> (Vec<ClassId>, Vec<ClassId>) {
        self.entries
            .iter()
            .filter(|e| e.role == role)
            .map(|e| (e.prediction, e.label))
            .unzip()
    }
}

/// Candidate classes for a protocol: unseen only for ZSL, all for GZSL.
pub fn candidates(test: &FeatureSet, mode: Mode) -> Vec<ClassId> {
    match mode {
        Mode::Zsl => test.classes().ids_with(Role::Unseen),
        Mode::Gzsl => test.classes().all_ids(),
    }
}

/// Evaluate `predictor` on `test` under the given protocol.
///
/// ZSL scores unseen test samples against unseen candidates and fills `acc`;
/// GZSL scores every test sample against all classes and fills the seen and
/// unseen accuracies plus HM.
pub fn evaluate_run(
    predictor: &dyn Predictor,
    test: &FeatureSet,
    semantics: &SemanticSet,
    mode: Mode,
    averaging: Averaging,
) -> Result<(EvalReport, PredictionLog)> {
    let classes = test.classes();
    let cands = candidates(test, mode);
    if cands.is_empty() {
        return Err(Error::Manifest(format!("no candidate classes for {mode}")));
    }
    for &c in &cands {
        if semantics.get(c).is_none() {
            return Err(Error::Manifest(format!(
                "candidate class {} has no semantics",
                classes.name(c)
            )));
        }
    }
    let roles_needed: &[Role] = match mode {
        Mode::Zsl => &[Role::Unseen],
        Mode::Gzsl => &[Role::Seen, Role::Unseen],
    };
    for &role in roles_needed {
        if !test.labels().iter().any(|&l| classes.role(l) == role) {
            return Err(Error::Manifest(
                format!("test set has no {role:?} samples for {mode}").to_lowercase(),
            ));
        }
    }

    let mut log = PredictionLog::default();
    for (i, (label, z)) in test.iter().enumerate() {
        let role = classes.role(label);
        if mode == Mode::Zsl && role == Role::Seen {
            continue;
        }
        let prediction = predictor.predict(z, &cands)?;
        log.entries.push(LogEntry {
            index: i,
            label,
            prediction,
            role,
        });
    }
    let report = report_from_log(&log, semantics.variation(), mode, averaging, classes)?;
    Ok((report, log))
}

/// Tally a prediction log into metrics.
pub fn report_from_log(
    log: &PredictionLog,
    variation: Variation,
    mode: Mode,
    averaging: Averaging,
    classes: &crate::datasets::ClassTable,
) -> Result<EvalReport> {
    let report = EvalReport::new(variation, averaging);
    let (up, ul) = log.split(Role::Unseen);
    let unseen_ids = classes.ids_with(Role::Unseen);
    let acc_u = top1(&up, &ul, &unseen_ids, averaging)?;
    let report = match mode {
        Mode::Zsl => report.with_acc(acc_u),
        Mode::Gzsl => {
            let (sp, sl) = log.split(Role::Seen);
            let acc_s = top1(&sp, &sl, &classes.ids_with(Role::Seen), averaging)?;
            report.with_gzsl(acc_s, acc_u)
        }
    };
    report.validate()?;
    Ok(report)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// Aligned text table: one row per variation, populated metric columns, BC.
pub fn format_table(reports: &[EvalReport]) -> String {
    let metrics: Vec<Metric> = Metric::ALL
        .into_iter()
        .filter(|&m| reports.iter().any(|r| r.metric(m).is_some()))
        .collect();
    let mut header = vec!["Variation".to_string()];
    header.extend(metrics.iter().map(|m| m.header().to_string()));
    header.push("BC".to_string());
    let mut rows = vec![header];
    for r in reports {
        let mut row = vec![r.variation.label().to_string()];
        row.extend(metrics.iter().map(|&m| fmt_metric(r.metric(m))));
        row.push(r.borda.to_string());
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

pub const CSV_HEADER: &str = "variation,averaging,acc,acc_s,acc_u,hm,bc";

pub fn report_csv_row(r: &EvalReport) -> String {
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    format!(
        "{},{},{},{},{},{},{}",
        r.variation,
        r.averaging,
        cell(r.acc),
        cell(r.acc_seen),
        cell(r.acc_unseen),
        cell(r.hm),
        r.borda
    )
}

pub fn write_reports_csv(reports: &[EvalReport], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", report_csv_row(r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ClassTable;
    use crate::fusion::SemanticBundle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn ids(v: &[u32]) -> Vec<ClassId> {
        v.iter().map(|&i| ClassId(i)).collect()
    }

    #[test]
    fn all_correct() {
        let l = ids(&[0, 1, 1, 2]);
        assert_eq!(per_class_top1(&l, &l, &ids(&[0, 1, 2])).unwrap(), 100.0);
    }

    #[test]
    fn one_right_one_wrong_class() {
        let l = ids(&[0, 1, 1, 1, 1]);
        let p = ids(&[0, 0, 0, 0, 0]);
        assert_eq!(per_class_top1(&p, &l, &ids(&[0, 1])).unwrap(), 50.0);
        assert_eq!(per_sample_top1(&p, &l).unwrap(), 20.0);
    }

    #[test]
    fn empty_classes_are_excluded_and_all_empty_errors() {
        let l = ids(&[0, 0]);
        assert_eq!(per_class_top1(&l, &l, &ids(&[0, 1, 2])).unwrap(), 100.0);
        assert!(per_class_top1(&[], &[], &ids(&[0, 1])).is_err());
    }

    #[test]
    fn label_outside_class_set() {
        assert!(per_class_top1(&ids(&[0]), &ids(&[5]), &ids(&[0])).is_err());
    }

    #[test]
    fn random_instance_matches_counting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let labels: Vec<ClassId> = (0..n).map(|_| ClassId(rng.random_range(0..4))).collect();
        let preds: Vec<ClassId> = (0..n).map(|_| ClassId(rng.random_range(0..4))).collect();
        // Oracle: count per class with nested loops.
        let mut sum = 0.0;
        let mut k = 0;
        for c in 0..4 {
            let mut total = 0;
            let mut hit = 0;
            for i in 0..n {
                if labels[i] == ClassId(c) {
                    total += 1;
                    if preds[i] == labels[i] {
                        hit += 1;
                    }
                }
            }
            if total > 0 {
                sum += hit as f64 / total as f64;
                k += 1;
            }
        }
        let oracle = 100.0 * sum / k as f64;
        let got = per_class_top1(&preds, &labels, &ids(&[0, 1, 2, 3])).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn harmonic_mean_examples() {
        assert!((harmonic_mean(89.48, 14.20) - 24.51).abs() <= 0.01);
        assert!((harmonic_mean(37.5, 37.5) - 37.5).abs() < 1e-12);
        assert_eq!(harmonic_mean(0.0, 73.4), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }

    fn rows(v: &[[f64; 4]]) -> Vec<EvalReport> {
        v.iter()
            .zip(Variation::ALL)
            .map(|(r, var)| {
                let mut e = EvalReport::new(var, Averaging::PerClass);
                e.acc = Some(r[0]);
                e.acc_seen = Some(r[1]);
                e.acc_unseen = Some(r[2]);
                e.hm = Some(r[3]);
                e
            })
            .collect()
    }

    #[test]
    fn borda_dem_awa() {
        let r = rows(&[
            [45.79, 83.15, 10.95, 19.35],
            [54.74, 56.09, 8.71, 15.09],
            [52.26, 85.45, 15.33, 25.99],
        ]);
        assert_eq!(borda_count(&r).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn borda_tf_vaegan_awa() {
        let r = rows(&[
            [56.3, 72.44, 45.34, 55.37],
            [64.31, 78.72, 40.53, 53.51],
            [57.14, 73.67, 44.54, 55.47],
        ]);
        assert_eq!(borda_count(&r).unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn borda_ties_all_score() {
        let r = rows(&[[1.0, 2.0, 3.0, 2.0]; 3]);
        assert_eq!(borda_count(&r).unwrap(), vec![4, 4, 4]);
    }

    #[test]
    fn borda_rejects_mismatched_metrics() {
        let mut r = rows(&[[1.0, 2.0, 3.0, 2.0]; 2]);
        r[1].hm = None;
        assert!(matches!(borda_count(&r), Err(Error::Contract(_))));
        assert!(borda_count(&r[..1]).is_err());
    }

    struct Fixed(Option<ClassId>);

    impl Predictor for Fixed {
        fn predict(&self, _: &[f64], c: &[ClassId]) -> Result<ClassId> {
            Ok(self.0.unwrap_or(c[0]))
        }
    }

    /// Reads the label back out of the first feature.
    struct Oracle;

    impl Predictor for Oracle {
        fn predict(&self, z: &[f64], _: &[ClassId]) -> Result<ClassId> {
            Ok(ClassId(z[0] as u32))
        }
    }

    fn fixture() -> (FeatureSet, SemanticSet) {
        let t = ClassTable::new(&["a", "b"], &["c", "d"]).unwrap();
        let rows: Vec<(ClassId, Vec<f64>)> = (0..4u32)
            .flat_map(|c| (0..3).map(move |j| (ClassId(c), vec![c as f64, j as f64])))
            .collect();
        let fs = FeatureSet::from_rows(&rows, t.clone()).unwrap();
        let b = t
            .iter()
            .map(|c| SemanticBundle {
                class: c.id,
                name: c.name.clone(),
                class_vec: vec![0.0],
                desc_vec: vec![0.0],
                fused: None,
            })
            .collect();
        (fs, SemanticSet::new(1, Variation::Ours, b).unwrap())
    }

    #[test]
    fn perfect_predictor() {
        let (fs, sem) = fixture();
        let (r, log) = evaluate_run(&Oracle, &fs, &sem, Mode::Gzsl, Averaging::PerClass).unwrap();
        assert_eq!(r.hm, Some(100.0));
        assert_eq!(log.entries.len(), 12);
        let (r, log) = evaluate_run(&Oracle, &fs, &sem, Mode::Zsl, Averaging::PerClass).unwrap();
        assert_eq!(r.acc, Some(100.0));
        assert_eq!(r.hm, None);
        assert_eq!(log.entries.len(), 6);
    }

    #[test]
    fn always_seen_predictor() {
        let (fs, sem) = fixture();
        let (r, _) = evaluate_run(&Fixed(Some(ClassId(0))), &fs, &sem, Mode::Gzsl, Averaging::PerClass).unwrap();
        assert_eq!(r.acc_unseen, Some(0.0));
        assert_eq!(r.hm, Some(0.0));
        assert_eq!(r.acc_seen, Some(50.0));
    }

    #[test]
    fn missing_candidate_semantics() {
        let (fs, sem) = fixture();
        let partial: Vec<SemanticBundle> = sem.iter().take(3).cloned().collect();
        let sem = SemanticSet::new(1, Variation::Ours, partial).unwrap();
        let err = evaluate_run(&Oracle, &fs, &sem, Mode::Zsl, Averaging::PerClass).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
    }

    #[test]
    fn gzsl_needs_seen_test_samples() {
        let (fs, sem) = fixture();
        let unseen_only = fs.with_role(Role::Unseen);
        assert!(evaluate_run(&Oracle, &unseen_only, &sem, Mode::Zsl, Averaging::PerClass).is_ok());
        let err = evaluate_run(&Oracle, &unseen_only, &sem, Mode::Gzsl, Averaging::PerClass).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
    }

    #[test]
    fn table_and_csv() {
        let mut r = rows(&[[45.79, 83.15, 10.95, 19.35], [52.26, 85.45, 15.33, 25.99]]);
        assign_borda(&mut r).unwrap();
        let t = format_table(&r);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Variation"));
        assert!(lines[3].ends_with(" 4"));
        let mut csv = Vec::new();
        write_reports_csv(&r, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "only-class-name,per-class,45.7900,83.1500,10.9500,19.3500,0"
        );
    }

    proptest! {
        #[test]
        fn hm_bounded_by_twice_min(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let h = harmonic_mean(a, b);
            prop_assert!(h <= 2.0 * a.min(b) + 1e-9);
            prop_assert!(h >= a.min(b) - 1e-9);
            let mean = (a + b) / 2.0;
            prop_assert!(h <= mean + 1e-9);
            if (a - b).abs() > 1e-6 {
                prop_assert!(h < mean);
            } else {
                prop_assert!((h - mean).abs() < 1e-6);
            }
        }

        #[test]
        fn per_class_is_order_invariant(
            pairs in proptest::collection::vec((0u32..5, 0u32..5), 1..60),
            seed in 0u64..100,
        ) {
            let (p, l): (Vec<ClassId>, Vec<ClassId>) = pairs.iter().map(|&(a, b)| (ClassId(a), ClassId(b))).unzip();
            let classes = ids(&[0, 1, 2, 3, 4]);
            let base = per_class_top1(&p, &l, &classes).unwrap();
            let mut idx: Vec<usize> = (0..p.len()).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<ClassId> = idx.iter().map(|&i| p[i]).collect();
            let l2: Vec<ClassId> = idx.iter().map(|&i| l[i]).collect();
            prop_assert!((per_class_top1(&p2, &l2, &classes).unwrap() - base).abs() < 1e-9);
        }
    }
}
