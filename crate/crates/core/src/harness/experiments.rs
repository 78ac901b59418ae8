use super::export::{rows_of, write_report, write_run_config, write_states_csv};
use super::session::{
    ar_dataset, calibrate_noise, canonical_patterns, load_mnist_subset, n_classes, record_session, session_plan,
    SessionPlan, SessionRecord,
};
use super::{Family, HarnessConfig, HarnessError, Substrate};
use crate::ar::{init_esn, EsnConfig, EsnReservoir, NoiseModel};
use crate::culture::{advance_day, grow_culture, spontaneous_window, Culture};
use crate::dsp::process_recording;
use crate::readout::{
    cross_validate, evaluate, mean_std, shuffle_baseline, train_slp, CvReport, LabeledDataset, ReadoutModel,
};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// Summary of the finite entries of `v`.
    pub fn of(v: &[f64]) -> Self {
        let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        let (mean, std) = mean_std(&finite);
        Self { mean, std, n: finite.len() }
    }

    pub fn sem(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.std / (self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub n_samples: usize,
    /// Mean k-fold test accuracy.
    pub accuracy: f64,
    pub fold_std: f64,
    pub per_class: Vec<f64>,
    pub confusion: Vec<Vec<u32>>,
}

impl SessionResult {
    fn new(plan: &SessionPlan, cv: &CvReport) -> Self {
        Self {
            session: plan.session,
            replicate: plan.replicate,
            day: plan.day,
            n_samples: cv.n_samples,
            accuracy: cv.mean,
            fold_std: cv.std,
            per_class: cv.per_class_accuracy.clone(),
            confusion: cv.confusion.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateResult {
    pub substrate: String,
    pub sessions: Vec<SessionResult>,
    /// Across-session summary for each day.
    pub per_day: Vec<Summary>,
    pub overall: Summary,
    pub per_class: Vec<Summary>,
}

impl SubstrateResult {
    fn new(substrate: &str, sessions: Vec<SessionResult>, n_days: usize, n_classes: usize) -> Self {
        let acc = |f: &dyn Fn(&SessionResult) -> bool| {
            Summary::of(&sessions.iter().filter(|s| f(s)).map(|s| s.accuracy).collect::<Vec<_>>())
        };
        let per_day = (0..n_days as u32).map(|d| acc(&|s| s.day == d)).collect();
        let overall = acc(&|_| true);
        let per_class = (0..n_classes)
            .map(|c| Summary::of(&sessions.iter().map(|s| s.per_class.get(c).copied().unwrap_or(f64::NAN)).collect::<Vec<_>>()))
            .collect();
        Self { substrate: substrate.into(), sessions, per_day, overall, per_class }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub w_ms: f64,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTransfer {
    pub day: u32,
    /// Accuracy of the first-day model on each session of this day.
    pub accuracy: Summary,
    /// Same pipeline with every state vector shuffled.
    pub shuffle: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDayResult {
    /// k-fold accuracy on the pooled first-day sessions.
    pub within_day: Summary,
    pub days: Vec<DayTransfer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub family: Family,
    pub n_classes: usize,
    pub w_ms: f64,
    pub seed: u64,
    pub culture: Option<SubstrateResult>,
    pub ar: Option<SubstrateResult>,
    pub shuffle: Option<SubstrateResult>,
    pub w_curve: Option<Vec<CurvePoint>>,
    pub cross_day: Option<CrossDayResult>,
    pub config: HarnessConfig,
    pub timing: Timing,
}

impl ExperimentReport {
    fn new(experiment: &str, family: Family, cfg: &HarnessConfig, started: Instant) -> Self {
        Self {
            experiment: experiment.into(),
            family,
            n_classes: n_classes(family, cfg),
            w_ms: cfg.protocol.window_for(family),
            seed: cfg.protocol.seed,
            culture: None,
            ar: None,
            shuffle: None,
            w_curve: None,
            cross_day: None,
            config: cfg.clone(),
            timing: Timing { wall_s: started.elapsed().as_secs_f64(), threads: rayon::current_num_threads() },
        }
    }

    fn finish(mut self, started: Instant, out: Option<&Path>) -> Result<Self, HarnessError> {
        self.timing.wall_s = started.elapsed().as_secs_f64();
        if let Some(dir) = out {
            write_run_config(dir, &self.config)?;
            write_report(dir.join(format!("{}-{}.json", self.experiment, self.family)), &self)?;
        }
        Ok(self)
    }
}

/// One session's plan with whatever was recorded for it.
struct Recorded {
    record: SessionRecord,
    noise: Option<NoiseModel>,
}

/// Grow each replicate culture, age it day by day, and record every
/// session. With `noise_w`, also calibrate artificial-reservoir noise on
/// that day's culture. `culture` false keeps the plans but skips stimulation.
fn record_family(
    family: Family,
    cfg: &HarnessConfig,
    culture: bool,
    noise_w: Option<f64>,
    out: Option<&Path>,
) -> Result<Vec<Recorded>, HarnessError> {
    cfg.validate()?;
    let images = match family {
        Family::Mnist => Some(load_mnist_subset(&cfg.families, cfg.protocol.mnist_images, cfg.protocol.seed)?),
        _ => None,
    };
    let canonical = match family {
        Family::Mnist => Vec::new(),
        _ => canonical_patterns(family, cfg)?,
    };
    let dir = out.map(|o| o.join(family.name()));
    let mut recorded = Vec::new();
    for r in 0..cfg.protocol.n_replicates as u32 {
        let mut c: Option<Culture> = None;
        for d in 0..cfg.protocol.n_days as u32 {
            let today = match c.take() {
                None => grow_culture(&replicate_config(cfg, r))?,
                Some(prev) => advance_day(&prev, cfg.drift)?,
            };
            let plan = session_plan(family, cfg, &canonical, images.as_deref(), r, d)?;
            let record = if culture {
                record_session(&today, &plan, cfg, dir.as_deref())?
            } else {
                SessionRecord { plan, processed: Vec::new() }
            };
            let noise = match noise_w {
                Some(w) => Some(calibrate_noise(&today, cfg, w, rng::derive(record.plan.seed, "noise", 0))?),
                None => None,
            };
            recorded.push(Recorded { record, noise });
            c = Some(today);
        }
    }
    Ok(recorded)
}

fn replicate_config(cfg: &HarnessConfig, r: u32) -> crate::culture::CultureConfig {
    let mut cc = cfg.culture.clone();
    cc.seed = rng::derive(cfg.protocol.seed, "replicate", r as u64);
    cc
}

fn esn_for(cfg: &HarnessConfig) -> Result<EsnReservoir, HarnessError> {
    Ok(init_esn(&EsnConfig { seed: rng::derive(cfg.protocol.seed, "esn", cfg.esn.seed), ..cfg.esn.clone() })?)
}

fn cv(ds: &LabeledDataset, cfg: &HarnessConfig, seed: u64) -> Result<CvReport, HarnessError> {
    Ok(cross_validate(ds, cfg.protocol.k_folds, &cfg.readout, seed)?)
}

/// k-fold accuracy of `ds` after shuffling, averaged over `n_seeds` shuffles.
fn shuffled_session(
    ds: &LabeledDataset,
    plan: &SessionPlan,
    cfg: &HarnessConfig,
    n_seeds: usize,
) -> Result<SessionResult, HarnessError> {
    let mut runs = Vec::with_capacity(n_seeds);
    for s in 0..n_seeds as u64 {
        let sh = shuffle_baseline(ds, rng::derive(plan.seed, "shuffle", s));
        runs.push(cv(&sh, cfg, rng::derive(plan.seed, "cv-shuffle", s))?);
    }
    let mut out = SessionResult::new(plan, &runs[0]);
    let accs: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    out.accuracy = Summary::of(&accs).mean;
    out.fold_std = Summary::of(&accs).std;
    for r in &runs[1..] {
        for (row, add) in out.confusion.iter_mut().zip(&r.confusion) {
            row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
    }
    out.per_class = crate::readout::per_class_accuracy(&out.confusion);
    Ok(out)
}

fn write_model(path: PathBuf, m: &ReadoutModel) -> Result<(), HarnessError> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    m.write_json(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn write_sessions_csv(path: PathBuf, results: &[&SubstrateResult]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["substrate", "session", "replicate", "day", "n_samples", "accuracy", "fold_std"])?;
    for r in results {
        for s in &r.sessions {
            w.write_record([
                r.substrate.clone(),
                s.session.to_string(),
                s.replicate.to_string(),
                s.day.to_string(),
                s.n_samples.to_string(),
                s.accuracy.to_string(),
                s.fold_std.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run every session of `family` on the chosen substrates and score the
/// readout by k-fold cross-validation. Culture runs also report the
/// shuffled-state baseline.
pub fn run_family(
    family: Family,
    substrate: Substrate,
    cfg: &HarnessConfig,
    out: Option<&Path>,
) -> Result<ExperimentReport, HarnessError> {
    let started = Instant::now();
    let mut report = ExperimentReport::new("run", family, cfg, started);
    let (w, nc) = (report.w_ms, report.n_classes);
    let margin = cfg.protocol.mask_margin;
    let recorded = record_family(family, cfg, substrate.culture(), substrate.ar().then_some(w), out)?;
    let dir = out.map(|o| o.join(family.name()));
    let n_days = cfg.protocol.n_days;

    if substrate.culture() {
        let mut real = Vec::new();
        let mut shuf = Vec::new();
        for rec in &recorded {
            let plan = &rec.record.plan;
            let ds = rec.record.dataset(w, margin, nc)?;
            real.push(SessionResult::new(plan, &cv(&ds, cfg, rng::derive(plan.seed, "cv", 0))?));
            shuf.push(shuffled_session(&ds, plan, cfg, 1)?);
            if let Some(d) = &dir {
                write_states_csv(d.join(format!("states/culture_s{:02}.csv", plan.session)), &rows_of(&ds, w))?;
                let m = train_slp(&ds, &cfg.readout, rng::derive(plan.seed, "model", 0))?;
                write_model(d.join(format!("models/culture_s{:02}.json", plan.session)), &m)?;
            }
        }
        report.culture = Some(SubstrateResult::new("culture", real, n_days, nc));
        report.shuffle = Some(SubstrateResult::new("shuffle", shuf, n_days, nc));
    }
    if substrate.ar() {
        let esn = esn_for(cfg)?;
        let mut res = Vec::new();
        for rec in &recorded {
            let plan = &rec.record.plan;
            let noise = rec.noise.as_ref().expect("noise calibrated for AR runs");
            let ds = ar_dataset(&esn, plan, noise, cfg, nc);
            res.push(SessionResult::new(plan, &cv(&ds, cfg, rng::derive(plan.seed, "cv-ar", 0))?));
            if let Some(d) = &dir {
                write_states_csv(d.join(format!("states/ar_s{:02}.csv", plan.session)), &rows_of(&ds, w))?;
            }
        }
        report.ar = Some(SubstrateResult::new("ar", res, n_days, nc));
    }
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
        let parts: Vec<&SubstrateResult> = [&report.culture, &report.shuffle, &report.ar].into_iter().flatten().collect();
        write_sessions_csv(d.join("sessions.csv"), &parts)?;
    }
    report.finish(started, out)
}

/// Culture accuracy next to the shuffled-state baseline averaged over
/// `n_seeds` shuffles per session.
pub fn run_shuffle_baseline(
    family: Family,
    cfg: &HarnessConfig,
    n_seeds: usize,
    out: Option<&Path>,
) -> Result<ExperimentReport, HarnessError> {
    if n_seeds == 0 {
        return Err(HarnessError::Config("need at least one shuffle seed".into()));
    }
    let started = Instant::now();
    let mut report = ExperimentReport::new("shuffle-baseline", family, cfg, started);
    let (w, nc) = (report.w_ms, report.n_classes);
    let mut real = Vec::new();
    let mut shuf = Vec::new();
    for rec in record_family(family, cfg, true, None, out)? {
        let plan = &rec.record.plan;
        let ds = rec.record.dataset(w, cfg.protocol.mask_margin, nc)?;
        real.push(SessionResult::new(plan, &cv(&ds, cfg, rng::derive(plan.seed, "cv", 0))?));
        shuf.push(shuffled_session(&ds, plan, cfg, n_seeds)?);
    }
    report.culture = Some(SubstrateResult::new("culture", real, cfg.protocol.n_days, nc));
    report.shuffle = Some(SubstrateResult::new("shuffle", shuf, cfg.protocol.n_days, nc));
    report.finish(started, out)
}

/// Culture accuracy as a function of the counting window. Recordings are
/// made once and recounted for every window.
pub fn ablate_window(family: Family, cfg: &HarnessConfig, out: Option<&Path>) -> Result<ExperimentReport, HarnessError> {
    let post = cfg.culture.recording.post_ms;
    if let Some(&w) = cfg.protocol.w_list.iter().find(|&&w| w > post) {
        return Err(HarnessError::Protocol(format!("window {w} ms exceeds the {post} ms post-stimulus recording")));
    }
    let started = Instant::now();
    let mut report = ExperimentReport::new("ablate-window", family, cfg, started);
    let nc = report.n_classes;
    let recorded = record_family(family, cfg, true, None, out)?;
    let mut curve = Vec::new();
    for &w in &cfg.protocol.w_list {
        let mut accs = Vec::new();
        for rec in &recorded {
            let plan = &rec.record.plan;
            let ds = rec.record.dataset(w, cfg.protocol.mask_margin, nc)?;
            accs.push(cv(&ds, cfg, rng::derive(plan.seed, "cv", 0))?.mean);
        }
        let s = Summary::of(&accs);
        curve.push(CurvePoint { w_ms: w, mean: s.mean, sem: s.sem(), n: s.n });
    }
    if let Some(o) = out {
        let d = o.join(family.name());
        fs::create_dir_all(&d)?;
        let mut f = BufWriter::new(File::create(d.join("w_curve.csv"))?);
        writeln!(f, "w_ms,mean,sem,n")?;
        for p in &curve {
            writeln!(f, "{},{},{},{}", p.w_ms, p.mean, p.sem, p.n)?;
        }
    }
    report.w_curve = Some(curve);
    report.finish(started, out)
}

/// Train one readout on the pooled first-day sessions and test it on every
/// later session without retraining.
pub fn cross_day_eval(family: Family, cfg: &HarnessConfig, out: Option<&Path>) -> Result<ExperimentReport, HarnessError> {
    if cfg.protocol.n_days < 2 {
        return Err(HarnessError::Config("cross-day evaluation needs n_days >= 2".into()));
    }
    let started = Instant::now();
    let mut report = ExperimentReport::new("cross-day", family, cfg, started);
    let (w, nc) = (report.w_ms, report.n_classes);
    let root = cfg.protocol.seed;
    let mut by_day: Vec<Vec<(LabeledDataset, u64)>> = vec![Vec::new(); cfg.protocol.n_days];
    for rec in record_family(family, cfg, true, None, out)? {
        let plan = &rec.record.plan;
        by_day[plan.day as usize].push((rec.record.dataset(w, cfg.protocol.mask_margin, nc)?, plan.seed));
    }
    let first: Vec<&LabeledDataset> = by_day[0].iter().map(|(d, _)| d).collect();
    let pooled = LabeledDataset::concat(&first);
    let within = cv(&pooled, cfg, rng::derive(root, "cross-day-cv", 0))?;
    let model = train_slp(&pooled, &cfg.readout, rng::derive(root, "cross-day-train", 0))?;
    let shuffled_first: Vec<LabeledDataset> =
        by_day[0].iter().map(|(d, s)| shuffle_baseline(d, rng::derive(*s, "shuffle", 0))).collect();
    let shuffled_model = train_slp(
        &LabeledDataset::concat(&shuffled_first.iter().collect::<Vec<_>>()),
        &cfg.readout,
        rng::derive(root, "cross-day-train-shuffle", 0),
    )?;
    let mut days = Vec::new();
    for (d, sessions) in by_day.iter().enumerate().skip(1) {
        let mut acc = Vec::new();
        let mut sh = Vec::new();
        for (ds, seed) in sessions {
            acc.push(evaluate(&model, ds)?.0);
            sh.push(evaluate(&shuffled_model, &shuffle_baseline(ds, rng::derive(*seed, "shuffle", 0)))?.0);
        }
        days.push(DayTransfer { day: d as u32, accuracy: Summary::of(&acc), shuffle: Summary::of(&sh) });
    }
    if let Some(o) = out {
        let d = o.join(family.name());
        fs::create_dir_all(&d)?;
        write_model(d.join("models/cross_day.json"), &model)?;
        let mut f = BufWriter::new(File::create(d.join("cross_day.csv"))?);
        writeln!(f, "day,mean,std,n,shuffle_mean")?;
        writeln!(f, "0,{},{},{},", within.mean, within.std, within.k)?;
        for t in &days {
            writeln!(f, "{},{},{},{},{}", t.day, t.accuracy.mean, t.accuracy.std, t.accuracy.n, t.shuffle.mean)?;
        }
    }
    report.cross_day = Some(CrossDayResult { within_day: Summary::of(&within.fold_accuracies), days });
    report.finish(started, out)
}

/// Record every session and write the state vectors without training.
/// Returns the files written.
pub fn export_states(
    family: Family,
    substrate: Substrate,
    cfg: &HarnessConfig,
    out: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let w = cfg.protocol.window_for(family);
    let nc = n_classes(family, cfg);
    let recorded = record_family(family, cfg, substrate.culture(), substrate.ar().then_some(w), Some(out))?;
    let dir = out.join(family.name()).join("states");
    let mut written = Vec::new();
    if substrate.culture() {
        for rec in &recorded {
            let ds = rec.record.dataset(w, cfg.protocol.mask_margin, nc)?;
            let p = dir.join(format!("culture_s{:02}.csv", rec.record.plan.session));
            write_states_csv(&p, &rows_of(&ds, w))?;
            written.push(p);
        }
    }
    if substrate.ar() {
        let esn = esn_for(cfg)?;
        let p = out.join("esn.bin");
        esn.w_rec.write_binary(BufWriter::new(File::create(&p)?))?;
        written.push(p);
        for rec in &recorded {
            let ds = ar_dataset(&esn, &rec.record.plan, rec.noise.as_ref().expect("noise calibrated"), cfg, nc);
            let p = dir.join(format!("ar_s{:02}.csv", rec.record.plan.session));
            write_states_csv(&p, &rows_of(&ds, w))?;
            written.push(p);
        }
    }
    write_run_config(out, cfg)?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowSummary {
    pub seed: u64,
    pub n_neurons: usize,
    pub n_excitatory: usize,
    pub n_synapses: usize,
    pub mean_out_degree: f64,
    /// Simulated somatic firing rate during a spontaneous window.
    pub spontaneous_rate_hz: f64,
    /// Detected events per channel per second in the same window.
    pub detected_rate_hz: f64,
}

/// Grow the first replicate culture and measure its spontaneous activity.
pub fn grow_summary(cfg: &HarnessConfig, duration_ms: f64) -> Result<GrowSummary, HarnessError> {
    cfg.validate()?;
    let cc = replicate_config(cfg, 0);
    let c = grow_culture(&cc)?;
    let rec = spontaneous_window(&c, duration_ms, rng::derive(cfg.protocol.seed, "grow-spontaneous", 0))?;
    let proc = process_recording(&rec, &cfg.detector, &cfg.artifact_filter);
    let secs = duration_ms / 1000.0;
    let n_events: usize = proc.kept.iter().map(Vec::len).sum();
    Ok(GrowSummary {
        seed: cc.seed,
        n_neurons: c.n_neurons(),
        n_excitatory: c.excitatory.iter().filter(|&&e| e).count(),
        n_synapses: c.synapses.n_edges(),
        mean_out_degree: c.mean_out_degree(),
        spontaneous_rate_hz: rec.truth.spikes.len() as f64 / c.n_neurons() as f64 / secs,
        detected_rate_hz: n_events as f64 / rec.n_channels as f64 / secs,
    })
}
