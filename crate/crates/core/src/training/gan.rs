use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{
    discriminator_loss, generator_forward_pass, generator_objective, Frozen, GanBatch, GanNets, ObjectiveSettings,
};
use super::{derive_seed, ImagePool, TrainConfig};
use crate::archive::Archive;
use crate::data::{BatchStream, Corpus, Domain};
use crate::error::{Error, Result};
use crate::losses::{LossReport, Mode};
use crate::models::{load_params, push_params, Classifier, Direction, Discriminator, Generator, Side};
use crate::nn::ParamSet;
use crate::optim::Adam;

/// What one optimization step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub step: u64,
    pub report: LossReport,
    pub d_r_loss: f64,
    pub d_s_loss: Option<f64>,
}

/// Per-epoch summary written to the log after the epoch's step records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub mean_total: f64,
    pub mean_d_r: f64,
    pub mean_d_s: Option<f64>,
}

#[derive(Serialize)]
struct TaggedEpoch<'a> {
    record: &'static str,
    #[serde(flatten)]
    inner: &'a EpochRecord,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&TaggedEpoch {
            record: "epoch",
            inner: self,
        })
        .expect("plain struct serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config_hash: String,
    step: u64,
    epochs_done: usize,
    step_in_epoch: usize,
    rng: ChaCha8Rng,
    stream: BatchStream,
    adam_t: [u64; 4],
}

/// The GAN training state: networks, optimizers, fake-image pools, the
/// batch order and the random stream. Classifiers are owned copies that are
/// only ever read.
pub struct GanTrainer {
    config: TrainConfig,
    config_hash: String,
    settings: ObjectiveSettings,
    real: Corpus,
    sim: Corpus,
    classifiers: Option<(Classifier<f32>, Classifier<f32>)>,
    nets: GanNets<f32>,
    opt_g_s2r: Adam<f32>,
    opt_g_r2s: Option<Adam<f32>>,
    opt_d_r: Adam<f32>,
    opt_d_s: Option<Adam<f32>>,
    pool_r: ImagePool,
    pool_s: ImagePool,
    rng: ChaCha8Rng,
    stream: BatchStream,
    step: u64,
    epochs_done: usize,
    step_in_epoch: usize,
}

fn without_classes(corpus: &Corpus, drop: &std::collections::BTreeSet<usize>) -> Result<Corpus> {
    Corpus::new(
        corpus.name.clone(),
        corpus.domain,
        corpus.class_count,
        corpus.image_shape,
        corpus
            .items
            .iter()
            .filter(|i| !drop.contains(&i.label))
            .cloned()
            .collect(),
    )
}

impl GanTrainer {
    /// Fresh networks seeded from `config.seed`. Label mode requires both
    /// classifiers; other modes ignore them.
    pub fn new(
        real: &Corpus,
        sim: &Corpus,
        classifiers: Option<(&Classifier<f32>, &Classifier<f32>)>,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if real.domain != Domain::Real || sim.domain != Domain::Simulated {
            return Err(Error::Config(
                "train_gan takes a real corpus and a simulated corpus".into(),
            ));
        }
        if real.image_shape != sim.image_shape || real.class_count != sim.class_count {
            return Err(Error::Config(
                "real and simulated corpora disagree on classes or image shape".into(),
            ));
        }
        let mode = config.mode;
        let classifiers = match (mode, classifiers) {
            (Mode::LabelCyclegan, None) => {
                return Err(Error::Config("label_cyclegan needs both pretrained classifiers".into()));
            }
            (Mode::LabelCyclegan, Some((f_r, f_s))) => {
                for (f, side) in [(f_r, Side::RealSide), (f_s, Side::SimSide)] {
                    let c = f.config();
                    if c.side != side || c.classes != real.class_count || c.image_shape != real.image_shape {
                        return Err(Error::Config(format!(
                            "classifier for {side:?} does not fit the corpora"
                        )));
                    }
                }
                Some((f_r.clone(), f_s.clone()))
            }
            _ => None,
        };
        let (real, sim) = if config.drop_minor_from_gan_batches {
            (
                without_classes(real, &config.minor_classes)?,
                without_classes(sim, &config.minor_classes)?,
            )
        } else {
            (real.clone(), sim.clone())
        };
        let shape = real.image_shape;
        let k = real.class_count;
        let seed = config.seed;
        let arch = &config.arch;
        let g_s2r = Generator::new(
            arch.generator(shape, k, Direction::S2r, mode),
            derive_seed(seed, "g_s2r"),
        )?;
        let d_r = Discriminator::new(arch.discriminator(shape, Side::RealSide), derive_seed(seed, "d_r"))?;
        let (g_r2s, d_s) = if mode.has_cycle() {
            (
                Some(Generator::new(
                    arch.generator(shape, k, Direction::R2s, mode),
                    derive_seed(seed, "g_r2s"),
                )?),
                Some(Discriminator::new(
                    arch.discriminator(shape, Side::SimSide),
                    derive_seed(seed, "d_s"),
                )?),
            )
        } else {
            (None, None)
        };
        let nets = GanNets { g_s2r, g_r2s, d_r, d_s };
        let adam = config.adam(true);
        let stream = BatchStream::paired(&real, &sim, config.batch_size, derive_seed(seed, "gan.order"))?;
        Ok(Self {
            config_hash: config.hash(),
            settings: ObjectiveSettings {
                mode,
                weights: config.weights.clone(),
                adversarial: config.adversarial,
                exclude: config.label_loss_exclusions(),
            },
            opt_g_s2r: Adam::new(nets.g_s2r.params(), adam),
            opt_g_r2s: nets.g_r2s.as_ref().map(|g| Adam::new(g.params(), adam)),
            opt_d_r: Adam::new(nets.d_r.params(), adam),
            opt_d_s: nets.d_s.as_ref().map(|d| Adam::new(d.params(), adam)),
            pool_r: ImagePool::new(config.pool_size, &shape),
            pool_s: ImagePool::new(config.pool_size, &shape),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "gan.pool")),
            stream,
            step: 0,
            epochs_done: 0,
            step_in_epoch: 0,
            config: config.clone(),
            real,
            sim,
            classifiers,
            nets,
        })
    }

    pub fn nets(&self) -> &GanNets<f32> {
        &self.nets
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.stream.batches_per_epoch()
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done >= self.config.epochs
    }

    /// The classifiers the trainer reads in label mode.
    pub fn classifiers(&self) -> Option<(&Classifier<f32>, &Classifier<f32>)> {
        self.classifiers.as_ref().map(|(a, b)| (a, b))
    }

    /// Learning rate of the epoch in progress.
    pub fn learning_rate(&self) -> f64 {
        let epoch = (self.epochs_done + 1).min(self.config.epochs);
        self.config
            .lr_decay
            .rate(self.config.learning_rate, epoch, self.config.epochs)
    }

    /// One step: discriminators on pooled fakes (D_r, then D_s), then both
    /// generators on the total objective against the updated discriminators.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let step = self.step + 1;
        self.try_step().map_err(|e| match e {
            Error::Loss(msg) if msg.contains("non-finite") => Error::NonFinite { step, what: msg },
            other => other,
        })
    }

    fn try_step(&mut self) -> Result<StepOutcome> {
        let lr = self.learning_rate();
        let step = self.step + 1;
        let raw = self.stream.next_batch(&self.real, Some(&self.sim))?;
        let sim_part = raw.second.expect("paired stream yields two parts");
        let batch = GanBatch {
            x_r: raw.first.images,
            y_r: raw.first.labels,
            x_s: sim_part.images,
            y_s: sim_part.labels,
        };
        let mode = self.settings.mode;
        let pass = generator_forward_pass(&self.nets, &batch, mode)?;

        let fake_r = self.pool_r.query(&pass.fake_r, &mut self.rng)?;
        let (d_r_loss, g) = discriminator_loss(&self.nets.d_r, &batch.x_r, &fake_r, self.settings.adversarial)?;
        finite(d_r_loss, step, "discriminator D_r loss")?;
        self.opt_d_r
            .step(self.nets.d_r.params_mut(), &g, lr)
            .map_err(|e| restep(e, step))?;

        let d_s_loss = match (&pass.cycle, self.nets.d_s.as_mut(), self.opt_d_s.as_mut()) {
            (Some(cy), Some(d_s), Some(opt)) => {
                let fake_s = self.pool_s.query(&cy.fake_s, &mut self.rng)?;
                let (loss, g) = discriminator_loss(d_s, &batch.x_s, &fake_s, self.settings.adversarial)?;
                finite(loss, step, "discriminator D_s loss")?;
                opt.step(d_s.params_mut(), &g, lr).map_err(|e| restep(e, step))?;
                Some(loss)
            }
            _ => None,
        };

        let frozen = self.classifiers.as_ref().map(|(f_r, f_s)| Frozen { f_r, f_s });
        let (report, g_s2r, g_r2s) = generator_objective(&self.nets, frozen, &batch, &pass, &self.settings)?;
        finite(report.total, step, "generator objective")?;
        self.opt_g_s2r
            .step(self.nets.g_s2r.params_mut(), &g_s2r, lr)
            .map_err(|e| restep(e, step))?;
        if let (Some(g), Some(gen), Some(opt)) = (g_r2s, self.nets.g_r2s.as_mut(), self.opt_g_r2s.as_mut()) {
            opt.step(gen.params_mut(), &g, lr).map_err(|e| restep(e, step))?;
        }
        if let Some(name) = [
            Some(self.nets.g_s2r.params()),
            self.nets.g_r2s.as_ref().map(Generator::params),
        ]
        .into_iter()
        .flatten()
        .find_map(ParamSet::first_non_finite)
        {
            return Err(Error::NonFinite {
                step,
                what: format!("generator parameter `{name}`"),
            });
        }

        self.step = step;
        self.step_in_epoch += 1;
        if self.step_in_epoch == self.stream.batches_per_epoch() {
            self.step_in_epoch = 0;
            self.epochs_done += 1;
        }
        Ok(StepOutcome {
            step,
            report,
            d_r_loss,
            d_s_loss,
        })
    }

    /// Full training state as an archive; `from_checkpoint` continues it
    /// exactly.
    pub fn to_checkpoint(&self) -> Archive {
        let meta = CheckpointMeta {
            kind: "gan_checkpoint".into(),
            config_hash: self.config_hash.clone(),
            step: self.step,
            epochs_done: self.epochs_done,
            step_in_epoch: self.step_in_epoch,
            rng: self.rng.clone(),
            stream: self.stream.clone(),
            adam_t: [
                self.opt_g_s2r.t,
                self.opt_g_r2s.as_ref().map_or(0, |o| o.t),
                self.opt_d_r.t,
                self.opt_d_s.as_ref().map_or(0, |o| o.t),
            ],
        };
        let mut a = Archive::new(serde_json::to_value(meta).expect("checkpoint metadata serializes"));
        let mut net = |name: &str, params: &ParamSet<f32>, opt: &Adam<f32>| {
            push_params(&mut a, &format!("{name}/"), params);
            for (i, (m, v)) in opt.m.iter().zip(&opt.v).enumerate() {
                a.push(format!("adam/{name}/m/{i}"), vec![m.len()], m.clone());
                a.push(format!("adam/{name}/v/{i}"), vec![v.len()], v.clone());
            }
        };
        net("g_s2r", self.nets.g_s2r.params(), &self.opt_g_s2r);
        net("d_r", self.nets.d_r.params(), &self.opt_d_r);
        if let (Some(g), Some(o)) = (&self.nets.g_r2s, &self.opt_g_r2s) {
            net("g_r2s", g.params(), o);
        }
        if let (Some(d), Some(o)) = (&self.nets.d_s, &self.opt_d_s) {
            net("d_s", d.params(), o);
        }
        for (name, pool) in [("pool/r", &self.pool_r), ("pool/s", &self.pool_s)] {
            let (shape, data) = pool.to_tensor();
            a.push(name, shape, data);
        }
        a
    }

    /// Rebuilds a trainer from a checkpoint written under the same config.
    pub fn from_checkpoint(
        archive: &Archive,
        real: &Corpus,
        sim: &Corpus,
        classifiers: Option<(&Classifier<f32>, &Classifier<f32>)>,
        config: &TrainConfig,
    ) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(archive.metadata.clone())?;
        if meta.kind != "gan_checkpoint" {
            return Err(Error::Archive(format!(
                "expected a gan_checkpoint archive, found `{}`",
                meta.kind
            )));
        }
        if meta.config_hash != config.hash() {
            return Err(Error::Config(
                "checkpoint was written under a different training config".into(),
            ));
        }
        let mut t = Self::new(real, sim, classifiers, config)?;
        fn restore(a: &Archive, name: &str, params: &mut ParamSet<f32>, opt: &mut Adam<f32>, step: u64) -> Result<()> {
            load_params(a, &format!("{name}/"), params)?;
            for i in 0..opt.m.len() {
                for (which, buf) in [("m", &mut opt.m[i]), ("v", &mut opt.v[i])] {
                    let saved = a.tensor(&format!("adam/{name}/{which}/{i}"))?;
                    if saved.data.len() != buf.len() {
                        return Err(Error::Archive(format!(
                            "optimizer state `{name}/{which}/{i}` has the wrong size"
                        )));
                    }
                    buf.copy_from_slice(&saved.data);
                }
            }
            opt.t = step;
            Ok(())
        }
        restore(
            archive,
            "g_s2r",
            t.nets.g_s2r.params_mut(),
            &mut t.opt_g_s2r,
            meta.adam_t[0],
        )?;
        restore(archive, "d_r", t.nets.d_r.params_mut(), &mut t.opt_d_r, meta.adam_t[2])?;
        if let (Some(g), Some(o)) = (t.nets.g_r2s.as_mut(), t.opt_g_r2s.as_mut()) {
            restore(archive, "g_r2s", g.params_mut(), o, meta.adam_t[1])?;
        }
        if let (Some(d), Some(o)) = (t.nets.d_s.as_mut(), t.opt_d_s.as_mut()) {
            restore(archive, "d_s", d.params_mut(), o, meta.adam_t[3])?;
        }
        for (name, pool) in [("pool/r", &mut t.pool_r), ("pool/s", &mut t.pool_s)] {
            let saved = archive.tensor(name)?;
            *pool = ImagePool::from_tensor(config.pool_size, &saved.shape, &saved.data)?;
        }
        if meta.stream.batches_per_epoch() != t.stream.batches_per_epoch() {
            return Err(Error::Archive("checkpoint batch order does not fit the corpora".into()));
        }
        t.rng = meta.rng;
        t.stream = meta.stream;
        t.step = meta.step;
        t.epochs_done = meta.epochs_done;
        t.step_in_epoch = meta.step_in_epoch;
        Ok(t)
    }
}

fn finite(v: f64, step: u64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step,
            what: format!("{what} is {v}"),
        })
    }
}

fn restep(e: Error, step: u64) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { step, what },
        other => other,
    }
}

/// Where a run writes. Without a checkpoint directory nothing is saved;
/// without a log path nothing is logged.
#[derive(Clone, Debug, Default)]
pub struct GanRunOptions {
    pub checkpoint_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    /// Continue from this checkpoint instead of starting fresh; the log is
    /// appended to.
    pub resume_from: Option<PathBuf>,
    /// Stop after this many total steps (for smoke runs and tests).
    pub max_steps: Option<u64>,
}

pub struct GanOutcome {
    pub trainer: GanTrainer,
    /// Reports of the steps run by this call, in order.
    pub reports: Vec<LossReport>,
    pub epochs: Vec<EpochRecord>,
}

pub const LATEST_CHECKPOINT: &str = "latest.lcgan";
pub const DIAGNOSTIC_CHECKPOINT: &str = "diagnostic.lcgan";

/// Runs (or resumes) GAN training to `config.epochs`, logging each step's
/// LossReport as one JSON line followed by one epoch record per epoch, and
/// overwriting `latest.lcgan` after every epoch. A non-finite value aborts
/// the run after saving `diagnostic.lcgan`.
pub fn train_gan(
    real: &Corpus,
    sim: &Corpus,
    classifiers: Option<(&Classifier<f32>, &Classifier<f32>)>,
    config: &TrainConfig,
    options: &GanRunOptions,
) -> Result<GanOutcome> {
    let mut trainer = match &options.resume_from {
        Some(path) => GanTrainer::from_checkpoint(&Archive::load(path)?, real, sim, classifiers, config)?,
        None => GanTrainer::new(real, sim, classifiers, config)?,
    };
    let mut log = match &options.log_path {
        // a resumed log keeps exactly the lines of the checkpointed epochs
        Some(path) => Some(open_log(
            path,
            options
                .resume_from
                .as_ref()
                .map(|_| trainer.step_count() as usize + trainer.epochs_done()),
        )?),
        None => None,
    };
    let mut reports = Vec::new();
    let mut epochs = Vec::new();
    let mut acc = (0usize, 0.0f64, 0.0f64, 0.0f64);
    while !trainer.is_finished() && options.max_steps.is_none_or(|m| trainer.step_count() < m) {
        let lr = trainer.learning_rate();
        let epoch_before = trainer.epochs_done();
        let out = match trainer.step() {
            Ok(out) => out,
            Err(e @ Error::NonFinite { .. }) => {
                if let Some(dir) = &options.checkpoint_dir {
                    trainer.to_checkpoint().save(&dir.join(DIAGNOSTIC_CHECKPOINT))?;
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", out.report.to_json_line())?;
        }
        acc.0 += 1;
        acc.1 += out.report.total;
        acc.2 += out.d_r_loss;
        acc.3 += out.d_s_loss.unwrap_or(0.0);
        reports.push(out.report);
        if trainer.epochs_done() > epoch_before {
            let n = acc.0 as f64;
            let record = EpochRecord {
                epoch: trainer.epochs_done(),
                steps: acc.0,
                learning_rate: lr,
                mean_total: acc.1 / n,
                mean_d_r: acc.2 / n,
                mean_d_s: out.d_s_loss.map(|_| acc.3 / n),
            };
            acc = (0, 0.0, 0.0, 0.0);
            if let Some(w) = log.as_mut() {
                writeln!(w, "{}", record.to_json_line())?;
                w.flush()?;
            }
            if let Some(dir) = &options.checkpoint_dir {
                trainer.to_checkpoint().save(&dir.join(LATEST_CHECKPOINT))?;
            }
            epochs.push(record);
        }
    }
    if let Some(mut w) = log {
        w.flush()?;
    }
    Ok(GanOutcome {
        trainer,
        reports,
        epochs,
    })
}

fn open_log(path: &Path, keep_lines: Option<usize>) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = match keep_lines {
        Some(n) => {
            let old = std::fs::read_to_string(path).unwrap_or_default();
            let kept: String = old.lines().take(n).flat_map(|l| [l, "\n"]).collect();
            std::fs::write(path, kept)?;
            OpenOptions::new().append(true).open(path)?
        }
        None => File::create(path)?,
    };
    Ok(BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_synthetic_corpus, DatasetManifest, Split};
    use crate::training::{pretrain_classifier, Architecture};

    fn corpora() -> (Corpus, Corpus) {
        let m = |d| DatasetManifest::synthetic("t", d, Split::Train, 3, 4, [16, 16, 3], 9);
        (
            build_synthetic_corpus(&m(Domain::Real)).unwrap(),
            build_synthetic_corpus(&m(Domain::Simulated)).unwrap(),
        )
    }

    fn tiny(mode: Mode) -> TrainConfig {
        TrainConfig {
            mode,
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.0002,
            pool_size: 3,
            arch: Architecture {
                generator_channels: 4,
                down_stages: 1,
                res_blocks: 1,
                discriminator_channels: 4,
                discriminator_stages: 2,
                classifier_channels: [4, 4],
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn classifiers(real: &Corpus, sim: &Corpus, cfg: &TrainConfig) -> (Classifier<f32>, Classifier<f32>) {
        let c = TrainConfig {
            epochs: 1,
            ..cfg.clone()
        };
        (
            pretrain_classifier(real, real, &c).unwrap().classifier,
            pretrain_classifier(sim, sim, &c).unwrap().classifier,
        )
    }

    #[test]
    fn label_mode_requires_classifiers() {
        let (real, sim) = corpora();
        assert!(matches!(
            GanTrainer::new(&real, &sim, None, &tiny(Mode::LabelCyclegan)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn resumed_run_matches_uninterrupted_run() {
        let (real, sim) = corpora();
        let cfg = tiny(Mode::LabelCyclegan);
        let (f_r, f_s) = classifiers(&real, &sim, &cfg);
        let dir = tempfile::tempdir().unwrap();
        let full = train_gan(&real, &sim, Some((&f_r, &f_s)), &cfg, &GanRunOptions::default()).unwrap();
        assert_eq!(full.reports.len(), 6);
        assert_eq!(full.epochs.len(), 2);

        let opts = GanRunOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            log_path: Some(dir.path().join("log.jsonl")),
            max_steps: Some(3),
            ..Default::default()
        };
        let first = train_gan(&real, &sim, Some((&f_r, &f_s)), &cfg, &opts).unwrap();
        assert_eq!(first.trainer.epochs_done(), 1);
        // a step past the checkpoint, as if the process died mid-epoch
        train_gan(
            &real,
            &sim,
            Some((&f_r, &f_s)),
            &cfg,
            &GanRunOptions {
                max_steps: Some(4),
                ..opts.clone()
            },
        )
        .unwrap();
        let resume = GanRunOptions {
            resume_from: Some(dir.path().join(LATEST_CHECKPOINT)),
            max_steps: None,
            ..opts
        };
        let rest = train_gan(&real, &sim, Some((&f_r, &f_s)), &cfg, &resume).unwrap();
        let stitched: Vec<_> = first.reports.iter().chain(&rest.reports).cloned().collect();
        assert_eq!(stitched, full.reports);
        assert_eq!(rest.trainer.nets(), full.trainer.nets());

        let (kept_r, kept_s) = rest.trainer.classifiers().unwrap();
        assert_eq!((kept_r, kept_s), (&f_r, &f_s));

        let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
        let lines: Vec<_> = log.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], full.reports[0].to_json_line());
        assert!(lines[3].contains("\"record\":\"epoch\""));
    }

    #[test]
    fn checkpoint_refuses_other_config() {
        let (real, sim) = corpora();
        let cfg = tiny(Mode::Cyclegan);
        let t = GanTrainer::new(&real, &sim, None, &cfg).unwrap();
        let other = TrainConfig { seed: 9, ..cfg };
        assert!(GanTrainer::from_checkpoint(&t.to_checkpoint(), &real, &sim, None, &other).is_err());
    }

    #[test]
    fn modes_report_only_their_terms() {
        let (real, sim) = corpora();
        let mut t = GanTrainer::new(&real, &sim, None, &tiny(Mode::Cyclegan)).unwrap();
        for _ in 0..3 {
            let r = t.step().unwrap().report;
            assert_eq!((r.lab_r, r.lab_s, r.selfreg), (0.0, 0.0, 0.0));
            assert!(r.cycle > 0.0);
        }
        let mut t = GanTrainer::new(&real, &sim, None, &tiny(Mode::Simgan)).unwrap();
        assert!(t.nets().g_r2s.is_none() && t.nets().d_s.is_none());
        let out = t.step().unwrap();
        assert_eq!((out.report.cycle, out.report.adv_s), (0.0, 0.0));
        assert!(out.report.selfreg > 0.0);
        assert!(out.d_s_loss.is_none());
    }

    #[test]
    fn dropping_minor_classes_shrinks_the_epoch() {
        let (real, sim) = corpora();
        let cfg = TrainConfig {
            minor_classes: [2].into(),
            drop_minor_from_gan_batches: true,
            ..tiny(Mode::Cyclegan)
        };
        let t = GanTrainer::new(&real, &sim, None, &cfg).unwrap();
        assert_eq!(t.steps_per_epoch(), 2);
    }
}
