//! Experiment runner: config in, `results.csv`, optional `history.csv` and
//! `manifest.json` out.

mod config;
mod output;

pub use config::{schema, Experiment, ExperimentConfig, Scheme, TrainConfig, GRAMMAR};
pub use output::{blob_digest, render_results, History, OutputDigest, ResultRow, RunManifest, HEADER, SCHEMA_LINE};

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aefj::{AefjConfig, AefjModel, LcdConfig, LcdGenerator, LcdTrainConfig, Receiver};
use crate::channel::{stream_rng, streams, Antennas, ChannelDraw, CsiState};
use crate::conventional::{average_secrecy, ExhaustiveSearch, FixedSplit, Realization, SecrecyStats, DEFAULT_GRID_STEPS};
use crate::error::{Error, Result};
use crate::mine::{train_mine_fj, MineFjConfig, MineFjOutcome, StopRule};
use crate::neuralnet::{flops, FlopReport};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub mc_draws: Option<u64>,
}

/// Everything an experiment produced, before it is written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub history: Option<History>,
}

/// Stream offset for CSI observation of ensemble draw `i`, kept apart from
/// the channel streams.
const CSI_STREAM: u64 = 1 << 32;

fn snr_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Draws `0..n` of the ensemble keyed by `seed`, shared by every scheme.
pub fn paired_ensemble(ant: Antennas, csi: crate::channel::CsiMode, seed: u64, n: u64) -> Result<Vec<Realization>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let draw = ChannelDraw::indexed(ant, 1.0, 1.0, seed, i);
            let csi = CsiState::observe(&draw, csi, &mut stream_rng(seed, streams::CHANNEL + CSI_STREAM + i))?;
            Ok(Realization { draw, csi })
        })
        .collect()
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
}

impl Ctx<'_> {
    fn row(&self, scheme: &str, metric: &str, snr_db: Option<f64>, ant: Antennas) -> ResultRow {
        ResultRow {
            experiment: self.cfg.experiment.as_str().to_string(),
            scheme: scheme.to_string(),
            metric: metric.to_string(),
            snr_db,
            antennas: ant,
            param: None,
            value: 0.0,
            std_error: None,
            count: 0,
            is_rate: false,
        }
    }

    fn stats_row(&self, scheme: &str, metric: &str, snr: f64, ant: Antennas, s: SecrecyStats) -> ResultRow {
        ResultRow {
            value: s.mean,
            std_error: Some(s.std_error),
            count: s.n as u64,
            is_rate: true,
            ..self.row(scheme, metric, Some(snr), ant)
        }
    }

    fn generator(&self, ant: Antennas) -> Result<LcdGenerator> {
        let cfg = self.cfg;
        let mut g = LcdGenerator::new(ant, &LcdConfig::default(), &mut stream_rng(cfg.seed, streams::INIT))?;
        let lo = cfg.snr_grid_db.first().copied().unwrap_or(10.0);
        let hi = cfg.snr_grid_db.last().copied().unwrap_or(lo);
        g.train(&LcdTrainConfig {
            steps: cfg.train.generator_steps,
            batch: cfg.train.generator_batch,
            snr_db: (lo, hi),
            lr: cfg.train.lr,
            csi: cfg.csi,
            seed: cfg.seed,
        })?;
        Ok(g)
    }

    fn aefj_config(&self, fj: bool, alpha: f64) -> AefjConfig {
        let cfg = self.cfg;
        let lo = cfg.snr_grid_db.first().copied().unwrap_or(10.0);
        let hi = cfg.snr_grid_db.last().copied().unwrap_or(lo);
        AefjConfig {
            batch: cfg.train.batch,
            steps: cfg.train.steps,
            alpha,
            snr_db: (lo, hi),
            lr: cfg.train.lr,
            fj,
            csi: cfg.csi,
            eve_extra_steps: cfg.train.eve_extra_steps,
            seed: cfg.seed,
            ..AefjConfig::default()
        }
    }

    fn mine_config(&self, ant: Antennas, snr_db: f64, beta: f64, instance: u64) -> MineFjConfig {
        let t = &self.cfg.train;
        MineFjConfig {
            antennas: ant,
            snr_db,
            beta,
            phi: t.phi,
            batch: t.mine_batch,
            minibatch: t.mine_minibatch,
            eval_batch: t.mine_eval_batch,
            iterations: t.iterations,
            lr_estimator: t.lr,
            lr_encoder: t.lr,
            stop: t.stop,
            csi: self.cfg.csi,
            channel_index: instance,
            seed: self.cfg.seed,
            ..MineFjConfig::default()
        }
    }

    /// Trains MINE-FJ on the first `instances` draws of the paired ensemble.
    fn mine_runs(&self, ant: Antennas, snr_db: f64, beta: f64) -> Result<Vec<MineFjOutcome>> {
        (0..self.cfg.train.instances as u64)
            .map(|k| train_mine_fj(&self.mine_config(ant, snr_db, beta, k)))
            .collect()
    }

    fn mine_rows(&self, ant: Antennas, snr: f64, param: Option<(String, f64)>, runs: &[MineFjOutcome]) -> Result<Vec<ResultRow>> {
        let w = self.cfg.train.proxy_window;
        let gsc: Vec<f64> = runs.iter().map(|o| o.gsc_proxy(w)).collect();
        let gap: Vec<f64> = runs.iter().map(|o| o.secrecy_proxy(w)).collect();
        let tail_mean = |f: fn(&crate::mine::MineFjHistory) -> f64| -> Vec<f64> {
            runs.iter()
                .map(|o| {
                    let h = &o.history[o.history.len().saturating_sub(w)..];
                    h.iter().map(f).sum::<f64>() / h.len() as f64
                })
                .collect()
        };
        let i_ab = tail_mean(|h| h.i_ab);
        let i_ae = tail_mean(|h| h.i_ae);
        let mut rows = Vec::new();
        for (metric, xs) in [("secrecy_rate", &gsc), ("mi_gap", &gap), ("i_ab", &i_ab), ("i_ae", &i_ae)] {
            let s = SecrecyStats::from_samples(xs)?;
            rows.push(ResultRow {
                param: param.clone(),
                ..self.stats_row(Scheme::MineFj.as_str(), metric, snr, ant, s)
            });
        }
        Ok(rows)
    }

    /// Mean secrecy of `scheme` at every grid point on the paired ensemble.
    fn secrecy_rows(&self, scheme: Scheme, ant: Antennas, param: Option<(String, f64)>) -> Result<Vec<ResultRow>> {
        let cfg = self.cfg;
        let mut rows = Vec::new();
        let tag = |mut r: ResultRow| {
            r.param = param.clone();
            r
        };
        match scheme {
            Scheme::ConventionalExhaustive => {
                let ens = paired_ensemble(ant, cfg.csi, cfg.seed, cfg.mc_draws)?;
                for &snr in &cfg.snr_grid_db {
                    let p = snr_to_power(snr);
                    let fit = ExhaustiveSearch::fit(&ens, p, DEFAULT_GRID_STEPS)?;
                    let s = average_secrecy(&fit, &ens, p)?;
                    rows.push(tag(self.stats_row(scheme.as_str(), "secrecy_rate", snr, ant, s)));
                    rows.push(tag(ResultRow {
                        value: fit.split.phi_star,
                        count: s.n as u64,
                        ..self.row(scheme.as_str(), "phi_star", Some(snr), ant)
                    }));
                }
            }
            Scheme::Aefj => {
                let ens = paired_ensemble(ant, cfg.csi, cfg.seed, cfg.mc_draws)?;
                let g = self.generator(ant)?;
                for &snr in &cfg.snr_grid_db {
                    let s = average_secrecy(&g, &ens, snr_to_power(snr))?;
                    rows.push(tag(self.stats_row(scheme.as_str(), "secrecy_rate", snr, ant, s)));
                }
            }
            Scheme::MineFj => {
                for &snr in &cfg.snr_grid_db {
                    let runs = self.mine_runs(ant, snr, cfg.train.beta)?;
                    rows.extend(self.mine_rows(ant, snr, param.clone(), &runs)?);
                }
            }
        }
        Ok(rows)
    }

    fn bler_rows(&self, model: &AefjModel, fj: bool, ant: Antennas) -> Result<Vec<ResultRow>> {
        let cfg = self.cfg;
        let mut rows = Vec::new();
        for receiver in [Receiver::Rx, Receiver::Eve] {
            let curve = model.eval_bler(&cfg.snr_grid_db, cfg.mc_draws, receiver, cfg.seed)?;
            for i in 0..curve.snr_db.len() {
                let (p, n) = (curve.bler[i], curve.trials[i]);
                rows.push(ResultRow {
                    param: Some(("fj".into(), if fj { 1.0 } else { 0.0 })),
                    value: p,
                    std_error: Some((p * (1.0 - p) / n as f64).sqrt()),
                    count: n,
                    ..self.row(Scheme::Aefj.as_str(), &format!("bler_{}", receiver.as_str()), Some(curve.snr_db[i]), ant)
                });
            }
        }
        Ok(rows)
    }

    fn train_aefj(&self, fj: bool, history: &mut History) -> Result<AefjModel> {
        let mut model = AefjModel::new(self.cfg.antennas, self.aefj_config(fj, self.cfg.train.alpha))?;
        for e in model.train()? {
            history.push(vec![
                (fj as u8).to_string(),
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.validation_loss.to_string(),
                e.generator_loss.to_string(),
                e.eve_loss.to_string(),
            ]);
        }
        Ok(model)
    }

    fn run(&self) -> Result<Report> {
        let cfg = self.cfg;
        let ant = cfg.antennas;
        match cfg.experiment {
            Experiment::SecrecyVsSnr => Ok(Report {
                rows: self.secrecy_rows(cfg.scheme, ant, None)?,
                history: None,
            }),
            Experiment::SecrecyVsNt => {
                let mut rows = Vec::new();
                for &nt in &cfg.nt_grid {
                    let a = Antennas::new(nt, ant.nr, ant.ne)?;
                    rows.extend(self.secrecy_rows(cfg.scheme, a, Some(("nt".into(), nt as f64)))?);
                }
                Ok(Report { rows, history: None })
            }
            Experiment::BlerVsSnr => {
                let mut history = History::new(&["fj", "epoch", "train_loss", "validation_loss", "generator_loss", "eve_loss"]);
                let mut rows = Vec::new();
                for fj in [true, false] {
                    let model = self.train_aefj(fj, &mut history)?;
                    rows.extend(self.bler_rows(&model, fj, ant)?);
                }
                Ok(Report { rows, history: Some(history) })
            }
            Experiment::SecrecyBlerTradeoff => {
                let mut history = History::new(&["fj", "epoch", "train_loss", "validation_loss", "generator_loss", "eve_loss"]);
                let mut rows = Vec::new();
                let ens = paired_ensemble(ant, cfg.csi, cfg.seed, cfg.mc_draws)?;
                for fj in [true, false] {
                    let model = self.train_aefj(fj, &mut history)?;
                    rows.extend(self.bler_rows(&model, fj, ant)?.into_iter().filter(|r| r.metric == "bler_rx"));
                    for &snr in &cfg.snr_grid_db {
                        let p = snr_to_power(snr);
                        let s = if fj {
                            average_secrecy(&model.generator, &ens, p)?
                        } else {
                            average_secrecy(&FixedSplit { phi: 1.0 }, &ens, p)?
                        };
                        rows.push(ResultRow {
                            param: Some(("fj".into(), if fj { 1.0 } else { 0.0 })),
                            ..self.stats_row(Scheme::Aefj.as_str(), "secrecy_rate", snr, ant, s)
                        });
                    }
                }
                Ok(Report { rows, history: Some(history) })
            }
            Experiment::SecrecyVsBeta => {
                let mut history = History::new(&["beta", "snr_db", "instance", "iteration", "i_ab", "i_ae", "gsc", "loss"]);
                let mut rows = Vec::new();
                for &beta in &cfg.train.beta_grid {
                    for &snr in &cfg.snr_grid_db {
                        let runs = self.mine_runs(ant, snr, beta)?;
                        for (k, o) in runs.iter().enumerate() {
                            for h in &o.history {
                                history.push(vec![
                                    beta.to_string(),
                                    snr.to_string(),
                                    k.to_string(),
                                    h.iteration.to_string(),
                                    h.i_ab.to_string(),
                                    h.i_ae.to_string(),
                                    h.gsc.to_string(),
                                    h.loss.to_string(),
                                ]);
                            }
                        }
                        rows.extend(self.mine_rows(ant, snr, Some(("beta".into(), beta)), &runs)?);
                    }
                }
                Ok(Report { rows, history: Some(history) })
            }
            Experiment::MineConvergence => {
                let mut history = History::new(&["snr_db", "iteration", "i_ab", "i_ae", "gsc", "loss"]);
                let mut rows = Vec::new();
                for &snr in &cfg.snr_grid_db {
                    let mut mc = self.mine_config(ant, snr, cfg.train.beta, 0);
                    mc.stop = StopRule::None;
                    let o = train_mine_fj(&mc)?;
                    for h in &o.history {
                        history.push(vec![
                            snr.to_string(),
                            h.iteration.to_string(),
                            h.i_ab.to_string(),
                            h.i_ae.to_string(),
                            h.gsc.to_string(),
                            h.loss.to_string(),
                        ]);
                    }
                    let last = o.history.last().expect("at least one iteration");
                    let n = o.history.len() as u64;
                    for (metric, v, rate) in [("i_ab_final", last.i_ab, true), ("gsc_final", last.gsc, true)] {
                        rows.push(ResultRow {
                            value: v,
                            count: n,
                            is_rate: rate,
                            ..self.row(Scheme::MineFj.as_str(), metric, Some(snr), ant)
                        });
                    }
                    let plateau = plateau_iteration(&o.history.iter().map(|h| h.i_ab).collect::<Vec<_>>(), 20, 0.01);
                    rows.push(ResultRow {
                        value: plateau.map_or(f64::NAN, |p| p as f64),
                        count: n,
                        ..self.row(Scheme::MineFj.as_str(), "plateau_iteration", Some(snr), ant)
                    });
                    if let Some(r) = o.raw_stop {
                        rows.push(ResultRow {
                            value: r as f64,
                            count: n,
                            ..self.row(Scheme::MineFj.as_str(), "raw_stop_iteration", Some(snr), ant)
                        });
                    }
                }
                Ok(Report { rows, history: Some(history) })
            }
            Experiment::FlopsReport => {
                let mut rows = Vec::new();
                let mut push = |name: &str, r: &FlopReport| {
                    for (i, l) in r.layers.iter().enumerate() {
                        for (metric, v) in [("flops_text", l.text), ("flops_table", l.table)] {
                            rows.push(ResultRow {
                                param: Some(("layer".into(), i as f64)),
                                value: v as f64,
                                count: 1,
                                ..self.row(name, metric, None, ant)
                            });
                        }
                    }
                    for (metric, v) in [("flops_text", r.text_total), ("flops_table", r.table_total)] {
                        rows.push(ResultRow {
                            value: v as f64,
                            count: r.layers.len() as u64,
                            ..self.row(name, metric, None, ant)
                        });
                    }
                };
                push("reference_stack", &reference_flops());
                let model = AefjModel::new(ant, self.aefj_config(true, cfg.train.alpha))?;
                push("aefj_encoder", &flops(&model.encoder));
                push("aefj_decoder", &flops(&model.decoder));
                push("aefj_generator", &flops(model.generator.network()));
                Ok(Report { rows, history: None })
            }
        }
    }
}

/// The 16-64-8-64-16 dense autoencoder used for the FLOP comparison.
pub fn reference_flops() -> FlopReport {
    FlopReport::from_dense(&[(16, 64), (64, 8), (8, 64), (64, 16)])
}

/// First iteration (1-based) `i > window` with
/// `|x_i − x_{i−window}| < rel_tol·|x_i|`.
pub fn plateau_iteration(xs: &[f64], window: usize, rel_tol: f64) -> Option<usize> {
    (window..xs.len())
        .find(|&i| (xs[i] - xs[i - window]).abs() < rel_tol * xs[i].abs())
        .map(|i| i + 1)
}

/// Runs the configured experiment without writing anything.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report> {
    Ctx { cfg }.run()
}

/// Side-by-side secrecy of several schemes on one paired ensemble.
pub fn execute_compare(cfg: &ExperimentConfig) -> Result<Report> {
    if !matches!(cfg.experiment, Experiment::SecrecyVsSnr | Experiment::SecrecyVsNt) {
        return Err(Error::Argument(format!(
            "compare needs a secrecy experiment, got {}",
            cfg.experiment.as_str()
        )));
    }
    let mut rows = Vec::new();
    for scheme in cfg.compare_schemes() {
        let single = ExperimentConfig {
            scheme,
            ..cfg.clone()
        };
        rows.extend(execute(&single)?.rows);
    }
    Ok(Report { rows, history: None })
}

/// Where and how a run happened.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub report: Report,
}

fn apply_overrides(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<ExperimentConfig> {
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(n) = ov.mc_draws {
        cfg.mc_draws = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {workers} workers: {e}")))
}

/// Runs `cfg` (or compares its schemes) and writes the outputs into `out_dir`.
/// On failure the outputs are removed and the manifest records the error.
pub fn run_config(cfg: ExperimentConfig, out_dir: &Path, ov: &Overrides, compare: bool) -> Result<RunOutcome> {
    let cfg = apply_overrides(cfg, ov)?;
    let workers = ov.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    std::fs::create_dir_all(out_dir)?;
    let started = output::unix_now();
    let result = pool(workers)?.install(|| if compare { execute_compare(&cfg) } else { execute(&cfg) });
    let mut manifest = RunManifest {
        status: "ok".into(),
        error: None,
        command: if compare { "compare" } else { "run" }.into(),
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        workers,
        started_unix: started,
        finished_unix: 0.0,
        outputs: Vec::new(),
    };
    let written = result.and_then(|report| {
        let mut files = vec![("results.csv", render_results(&report.rows))];
        if let Some(h) = &report.history {
            files.push(("history.csv", h.render()));
        }
        output::write_outputs(out_dir, &files).map(|d| (report, d))
    });
    manifest.finished_unix = output::unix_now();
    match written {
        Ok((report, digests)) => {
            manifest.outputs = digests;
            std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
            Ok(RunOutcome {
                out_dir: out_dir.to_path_buf(),
                manifest,
                report,
            })
        }
        Err(e) => {
            for name in ["results.csv", "history.csv"] {
                let _ = std::fs::remove_file(out_dir.join(name));
            }
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
            Err(e)
        }
    }
}

/// Loads the config at `path` and runs it.
pub fn run(path: &Path, out_dir: &Path, ov: &Overrides) -> Result<RunOutcome> {
    run_config(ExperimentConfig::load(path)?, out_dir, ov, false)
}

/// Loads the config at `path` and compares its schemes.
pub fn compare(path: &Path, out_dir: &Path, ov: &Overrides) -> Result<RunOutcome> {
    run_config(ExperimentConfig::load(path)?, out_dir, ov, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            antennas: Antennas { nt: 4, nr: 2, ne: 2 },
            snr_grid_db: vec![5.0, 15.0],
            csi: crate::channel::CsiMode::Perfect,
            scheme: Scheme::ConventionalExhaustive,
            schemes: vec![],
            mc_draws: 200,
            seed: 3,
            nt_grid: vec![2, 4],
            train: TrainConfig {
                generator_steps: 20,
                steps: 20,
                eve_extra_steps: 0,
                iterations: 4,
                mine_batch: 64,
                mine_minibatch: 64,
                mine_eval_batch: 64,
                instances: 2,
                proxy_window: 2,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn plateau_detection() {
        let xs = [1.0, 2.0, 2.5, 2.51, 2.52];
        assert_eq!(plateau_iteration(&xs, 1, 0.01), Some(4));
        assert_eq!(plateau_iteration(&xs, 3, 0.01), None);
    }

    #[test]
    fn paired_ensemble_is_prefix_stable() {
        let ant = Antennas { nt: 3, nr: 2, ne: 2 };
        let a = paired_ensemble(ant, crate::channel::CsiMode::Statistical { rho_e2: 0.1 }, 5, 10).unwrap();
        let b = paired_ensemble(ant, crate::channel::CsiMode::Statistical { rho_e2: 0.1 }, 5, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.draw.h, y.draw.h);
            assert_eq!(x.csi.h_hat, y.csi.h_hat);
        }
    }

    #[test]
    fn same_scheme_twice_gives_identical_rows() {
        let mut c = cfg(Experiment::SecrecyVsSnr);
        c.schemes = vec![Scheme::ConventionalExhaustive, Scheme::ConventionalExhaustive];
        let rows = execute_compare(&c).unwrap().rows;
        let half = rows.len() / 2;
        assert_eq!(rows[..half], rows[half..]);
    }

    #[test]
    fn compare_rejects_non_secrecy_experiments() {
        assert!(execute_compare(&cfg(Experiment::FlopsReport)).is_err());
    }

    #[test]
    fn every_experiment_runs_at_toy_scale() {
        for e in [
            Experiment::SecrecyVsSnr,
            Experiment::SecrecyVsNt,
            Experiment::BlerVsSnr,
            Experiment::SecrecyBlerTradeoff,
            Experiment::SecrecyVsBeta,
            Experiment::MineConvergence,
            Experiment::FlopsReport,
        ] {
            let r = execute(&cfg(e)).unwrap();
            assert!(!r.rows.is_empty(), "{e:?}");
            assert!(r.rows.iter().all(|row| row.experiment == e.as_str()));
        }
    }

    #[test]
    fn flops_report_carries_reference_totals() {
        let rows = execute(&cfg(Experiment::FlopsReport)).unwrap().rows;
        let total = |m: &str| {
            rows.iter()
                .find(|r| r.scheme == "reference_stack" && r.metric == m && r.param.is_none())
                .unwrap()
                .value
        };
        assert_eq!(total("flops_text"), 5992.0);
        assert_eq!(total("flops_table"), 6144.0);
    }

    #[test]
    fn failed_run_leaves_failure_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Experiment::SecrecyVsSnr);
        c.scheme = Scheme::Aefj;
        c.csi = crate::channel::CsiMode::Unknown;
        assert!(run_config(c, dir.path(), &Overrides::default(), false).is_err());
        assert!(!dir.path().join("results.csv").exists());
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["status"], "failed");
    }
}
