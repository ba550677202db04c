//! The end-to-end experiment: build both domains' corpora, pretrain the
//! domain classifiers, train each translation method, transform the
//! simulated training corpus, retrain on half-real/half-translated batches,
//! evaluate, and aggregate across seeds.
//!
//! Every output path is a function of `(out_dir, method, seed)`:
//!
//! ```text
//! out/data/{real,sim}-{train,validation,test}.corpus (+ .manifest.json)
//! out/pretrain/seed-<s>/{f_r,f_s,judge}.lcgan, pretrain.json
//! out/<method>/seed-<s>/{checkpoints,logs,reports,grids}/
//! out/baseline/seed-<s>/reports/eval.json
//! out/summary.csv
//! out/report/{grid-seed-<s>.png,summary.md}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::data::{build_corpus, induce_imbalance, Corpus, DatasetManifest, Domain, Image, ImbalanceSpec, Split};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_classifier, read_summary_csv, render_image_grid, translate_corpus, write_summary_csv, EvalReport,
    RunMetadata, SummaryRow,
};
use crate::losses::Mode;
use crate::models::{Classifier, Discriminator, Generator, ModelStamp};
use crate::training::{
    baseline_classifier, config_hash, derive_seed, pretrain_classifier, retrain_classifier, train_gan,
    transform_corpus, Architecture, GanRunOptions, TrainConfig,
};

pub const BASELINE: &str = "baseline";

/// The two domains' training manifests; validation and test splits reuse
/// them with other per-class counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub real: DatasetManifest,
    pub sim: DatasetManifest,
    pub validation_per_class: usize,
    pub test_per_class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Translation methods `pipeline` runs; the real-only baseline always runs.
    pub modes: Vec<Mode>,
    /// Simulated test items per class shown in image grids.
    #[serde(default = "default_grid_items")]
    pub grid_items_per_class: usize,
    pub data: DataConfig,
    pub imbalance: ImbalanceSpec,
    pub pretrain_r: TrainConfig,
    pub pretrain_s: TrainConfig,
    pub gan: TrainConfig,
    pub retrain: TrainConfig,
}

fn default_grid_items() -> usize {
    2
}

impl ExperimentConfig {
    /// Three-class synthetic digit pair at 16×16, one minor class reduced by
    /// 90%, 20 GAN epochs at batch 16.
    pub fn desk() -> Self {
        let shape = [16, 16, 3];
        let manifest = |name: &str, domain| DatasetManifest::synthetic(name, domain, Split::Train, 3, 300, shape, 1);
        let arch = Architecture {
            generator_channels: 16,
            down_stages: 2,
            res_blocks: 3,
            condition_s2r: None,
            condition_r2s: None,
            discriminator_channels: 16,
            discriminator_stages: 3,
            classifier_channels: [16, 32],
        };
        let classifier = TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.001,
            arch: arch.clone(),
            ..Default::default()
        };
        Self {
            out_dir: PathBuf::from("out"),
            seeds: vec![1, 2, 3],
            modes: vec![Mode::LabelCyclegan, Mode::Cyclegan],
            grid_items_per_class: default_grid_items(),
            data: DataConfig {
                real: manifest("real-train", Domain::Real),
                sim: manifest("sim-train", Domain::Simulated),
                validation_per_class: 50,
                test_per_class: 100,
            },
            imbalance: ImbalanceSpec::new([2], 0.9),
            pretrain_r: classifier.clone(),
            pretrain_s: classifier.clone(),
            gan: TrainConfig {
                epochs: 20,
                batch_size: 16,
                learning_rate: 0.001,
                arch,
                ..Default::default()
            },
            retrain: classifier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        d.real.validate()?;
        d.sim.validate()?;
        d.real.check_pair(&d.sim)?;
        if d.real.domain != Domain::Real || d.sim.domain != Domain::Simulated {
            return Err(Error::InvalidManifest(
                "data.real must be a real-domain manifest and data.sim a simulated one".into(),
            ));
        }
        if d.real.split != Split::Train || d.sim.split != Split::Train {
            return Err(Error::InvalidManifest("data manifests describe the train split".into()));
        }
        if d.validation_per_class == 0 || d.test_per_class == 0 {
            return Err(Error::InvalidManifest(
                "validation and test splits need items of every class".into(),
            ));
        }
        self.imbalance.validate(d.real.class_count)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seed roster is empty".into()));
        }
        for c in [&self.pretrain_r, &self.pretrain_s, &self.gan, &self.retrain] {
            c.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_at(text, Path::new("."))
    }

    /// Parses a TOML config. `data.real_manifest` / `data.sim_manifest` may
    /// name JSON manifest files instead of giving `data.real` / `data.sim`
    /// inline; they and any relative data paths resolve against `base`.
    pub fn from_toml_at(text: &str, base: &Path) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(text)?;
        if let Some(toml::Value::Table(data)) = value.get_mut("data") {
            for side in ["real", "sim"] {
                let key = format!("{side}_manifest");
                if let Some(entry) = data.remove(&key) {
                    let toml::Value::String(file) = entry else {
                        return Err(Error::InvalidManifest(format!("data.{key} must be a path")));
                    };
                    let path = base.join(file);
                    let manifest = DatasetManifest::load(&path).map_err(|e| match e {
                        Error::InvalidManifest(m) => Error::InvalidManifest(format!("{}: {m}", path.display())),
                        other => other,
                    })?;
                    let inline = toml::Value::try_from(&manifest)
                        .map_err(|e| Error::InvalidManifest(format!("{}: {e}", path.display())))?;
                    data.insert(side.to_string(), inline);
                }
            }
        }
        let mut c: Self = value.try_into()?;
        for m in [&mut c.data.real, &mut c.data.sim] {
            for p in [&mut m.images_path, &mut m.labels_path, &mut m.root]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_at(&std::fs::read_to_string(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    fn manifest(&self, domain: Domain, split: Split) -> DatasetManifest {
        let base = match domain {
            Domain::Real => &self.data.real,
            Domain::Simulated => &self.data.sim,
        };
        match split {
            Split::Train => base.clone(),
            Split::Validation => base.for_split(split, self.data.validation_per_class),
            Split::Test => base.for_split(split, self.data.test_per_class),
        }
    }

    fn phase(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            minor_classes: self.imbalance.minor_classes.clone(),
            ..base.clone()
        }
    }

    pub fn gan_config(&self, mode: Mode, seed: u64) -> TrainConfig {
        TrainConfig {
            mode,
            ..self.phase(&self.gan, seed)
        }
    }

    /// Hash of everything that determines a (method, seed) run's results;
    /// the output directory is not part of it.
    pub fn run_hash(&self, method: &str, seed: u64) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            method: &'a str,
            seed: u64,
            data: &'a DataConfig,
            imbalance: &'a ImbalanceSpec,
            pretrain_r: &'a TrainConfig,
            pretrain_s: &'a TrainConfig,
            gan: &'a TrainConfig,
            retrain: &'a TrainConfig,
        }
        config_hash(&Key {
            method,
            seed,
            data: &self.data,
            imbalance: &self.imbalance,
            pretrain_r: &self.pretrain_r,
            pretrain_s: &self.pretrain_s,
            gan: &self.gan,
            retrain: &self.retrain,
        })
    }
}

fn domain_tag(domain: Domain) -> &'static str {
    match domain {
        Domain::Real => "real",
        Domain::Simulated => "sim",
    }
}

const SPLITS: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
const DOMAINS: [Domain; 2] = [Domain::Real, Domain::Simulated];

/// All six corpora of an experiment.
#[derive(Clone, Debug)]
pub struct Datasets {
    corpora: BTreeMap<(u8, u8), Corpus>,
}

impl Datasets {
    pub fn get(&self, domain: Domain, split: Split) -> &Corpus {
        &self.corpora[&(domain as u8, split as u8)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub f_r_held_out_accuracy: f64,
    pub f_s_held_out_accuracy: f64,
    pub judge_held_out_accuracy: f64,
}

/// Classifiers of one seed: `f_r` on the imbalanced real corpus, `f_s` on
/// the simulated corpus, and `judge`, a real-side classifier trained on the
/// balanced real corpus that scores label preservation without the minor
/// class bias `f_r` carries.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub f_r: Classifier<f32>,
    pub f_s: Classifier<f32>,
    pub judge: Classifier<f32>,
    pub summary: PretrainSummary,
}

/// Fraction of translated simulated test items the judge assigns to their
/// source label, overall and per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub overall: f64,
    pub per_class: Vec<f64>,
    pub minor_classes: Vec<usize>,
    pub minor_mean: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub eval: EvalReport,
    pub preservation: Option<PreservationReport>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataStatus {
    UpToDate,
    Written(Vec<PathBuf>),
}

fn phase<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        e @ Error::Phase { .. } => e,
        e => Error::Phase {
            phase: name.to_string(),
            source: Box::new(e),
        },
    })
}

/// An experiment rooted at its output directory.
pub struct Experiment {
    pub config: ExperimentConfig,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn corpus_path(&self, domain: Domain, split: Split) -> PathBuf {
        self.out_dir()
            .join("data")
            .join(format!("{}-{}.corpus", domain_tag(domain), split.tag()))
    }

    fn manifest_path(&self, domain: Domain, split: Split) -> PathBuf {
        self.corpus_path(domain, split).with_extension("manifest.json")
    }

    pub fn pretrain_dir(&self, seed: u64) -> PathBuf {
        self.out_dir().join("pretrain").join(format!("seed-{seed}"))
    }

    pub fn run_dir(&self, method: &str, seed: u64) -> PathBuf {
        self.out_dir().join(method).join(format!("seed-{seed}"))
    }

    pub fn log_path(&self, mode: Mode, seed: u64) -> PathBuf {
        self.run_dir(mode.tag(), seed).join("logs").join("train.jsonl")
    }

    pub fn eval_path(&self, method: &str, seed: u64) -> PathBuf {
        self.run_dir(method, seed).join("reports").join("eval.json")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir().join("summary.csv")
    }

    pub fn generator_path(&self, mode: Mode, seed: u64) -> PathBuf {
        self.run_dir(mode.tag(), seed).join("checkpoints").join("g_s2r.lcgan")
    }

    /// Writes the six corpora and their resolved manifests. Existing files
    /// whose manifest matches are kept unless `force`.
    pub fn build_data(&self, force: bool) -> Result<DataStatus> {
        let mut written = Vec::new();
        for domain in DOMAINS {
            for split in SPLITS {
                let manifest = self.config.manifest(domain, split);
                let path = self.corpus_path(domain, split);
                let mpath = self.manifest_path(domain, split);
                let json = manifest.to_json();
                let current = path.exists() && std::fs::read_to_string(&mpath).is_ok_and(|m| m == json);
                if current && !force {
                    continue;
                }
                let corpus = build_corpus(&manifest)?;
                corpus.save(&path)?;
                std::fs::write(&mpath, &json)?;
                written.push(path);
            }
        }
        Ok(if written.is_empty() {
            DataStatus::UpToDate
        } else {
            DataStatus::Written(written)
        })
    }

    pub fn load_data(&self) -> Result<Datasets> {
        let mut corpora = BTreeMap::new();
        for domain in DOMAINS {
            for split in SPLITS {
                let path = self.corpus_path(domain, split);
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "{} is missing; run `data build` first",
                        path.display()
                    )));
                }
                corpora.insert((domain as u8, split as u8), Corpus::load(&path)?);
            }
        }
        Ok(Datasets { corpora })
    }

    /// The real training corpus after the seed's imbalance induction.
    pub fn imbalanced_real(&self, data: &Datasets, seed: u64) -> Result<Corpus> {
        induce_imbalance(
            data.get(Domain::Real, Split::Train),
            &self.config.imbalance,
            derive_seed(seed, "imbalance"),
        )
    }

    /// Pretrains (or reloads) the seed's classifiers.
    pub fn pretrain(&self, data: &Datasets, seed: u64, force: bool) -> Result<Pretrained> {
        let dir = self.pretrain_dir(seed);
        let summary_path = dir.join("pretrain.json");
        let names = ["f_r", "f_s", "judge"].map(|n| dir.join(format!("{n}.lcgan")));
        if !force && summary_path.exists() && names.iter().all(|p| p.exists()) {
            let load = |p: &Path| Classifier::<f32>::load(p).map(|(c, _)| c);
            return Ok(Pretrained {
                f_r: load(&names[0])?,
                f_s: load(&names[1])?,
                judge: load(&names[2])?,
                summary: serde_json::from_str(&std::fs::read_to_string(&summary_path)?)?,
            });
        }
        let real = self.imbalanced_real(data, seed)?;
        let cfg_r = self.config.phase(&self.config.pretrain_r, seed);
        let cfg_s = self.config.phase(&self.config.pretrain_s, seed);
        let f_r = pretrain_classifier(&real, data.get(Domain::Real, Split::Validation), &cfg_r)?;
        let f_s = pretrain_classifier(
            data.get(Domain::Simulated, Split::Train),
            data.get(Domain::Simulated, Split::Validation),
            &cfg_s,
        )?;
        let judge_cfg = TrainConfig {
            seed: derive_seed(seed, "judge"),
            ..cfg_r
        };
        let judge = pretrain_classifier(
            data.get(Domain::Real, Split::Train),
            data.get(Domain::Real, Split::Validation),
            &judge_cfg,
        )?;
        let summary = PretrainSummary {
            f_r_held_out_accuracy: f_r.held_out_accuracy,
            f_s_held_out_accuracy: f_s.held_out_accuracy,
            judge_held_out_accuracy: judge.held_out_accuracy,
        };
        let stamp = ModelStamp { seed, step: 0 };
        for (run, path) in [&f_r, &f_s, &judge].into_iter().zip(&names) {
            run.classifier.save(path, stamp)?;
        }
        std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(Pretrained {
            f_r: f_r.classifier,
            f_s: f_s.classifier,
            judge: judge.classifier,
            summary,
        })
    }

    /// Trains (or reloads) the method's s2r generator. An interrupted run
    /// resumes from its last epoch checkpoint unless `force`.
    pub fn train(
        &self,
        data: &Datasets,
        pre: &Pretrained,
        mode: Mode,
        seed: u64,
        force: bool,
    ) -> Result<Generator<f32>> {
        let final_path = self.generator_path(mode, seed);
        if !force && final_path.exists() {
            return Ok(Generator::load(&final_path)?.0);
        }
        let dir = final_path.parent().expect("checkpoint dir").to_path_buf();
        let latest = dir.join(crate::training::LATEST_CHECKPOINT);
        if force && dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        let real = self.imbalanced_real(data, seed)?;
        let config = self.config.gan_config(mode, seed);
        let options = GanRunOptions {
            checkpoint_dir: Some(dir.clone()),
            log_path: Some(self.log_path(mode, seed)),
            resume_from: latest.exists().then_some(latest),
            max_steps: None,
        };
        let classifiers = (mode == Mode::LabelCyclegan).then_some((&pre.f_r, &pre.f_s));
        let out = train_gan(
            &real,
            data.get(Domain::Simulated, Split::Train),
            classifiers,
            &config,
            &options,
        )?;
        let stamp = ModelStamp {
            seed,
            step: out.trainer.step_count(),
        };
        let nets = out.trainer.nets();
        if let Some(g) = &nets.g_r2s {
            g.save(&dir.join("g_r2s.lcgan"), stamp)?;
        }
        nets.d_r.save(&dir.join("d_r.lcgan"), stamp)?;
        if let Some(d) = &nets.d_s {
            d.save(&dir.join("d_s.lcgan"), stamp)?;
        }
        // written last: its presence marks the phase complete
        nets.g_s2r.save(&final_path, stamp)?;
        Ok(nets.g_s2r.clone())
    }

    pub fn transformed_path(&self, mode: Mode, seed: u64) -> PathBuf {
        self.run_dir(mode.tag(), seed).join("transformed.corpus")
    }

    /// Maps the simulated training corpus through the trained generator.
    pub fn transform(&self, data: &Datasets, generator: &Generator<f32>, mode: Mode, seed: u64) -> Result<Corpus> {
        let t = transform_corpus(generator, data.get(Domain::Simulated, Split::Train))?;
        t.save(&self.transformed_path(mode, seed))?;
        Ok(t)
    }

    /// Label preservation of `generator` on the simulated test split, judged
    /// by the balanced-data real classifier.
    pub fn preservation(
        &self,
        data: &Datasets,
        pre: &Pretrained,
        generator: &Generator<f32>,
    ) -> Result<PreservationReport> {
        let translated = transform_corpus(generator, data.get(Domain::Simulated, Split::Test))?;
        let r = evaluate_classifier(&pre.judge, &translated)?;
        let minor: Vec<usize> = self.config.imbalance.minor_classes.iter().copied().collect();
        let minor_mean = if minor.is_empty() {
            r.overall_accuracy
        } else {
            minor.iter().map(|&c| r.per_class_accuracy[c]).sum::<f64>() / minor.len() as f64
        };
        Ok(PreservationReport {
            overall: r.overall_accuracy,
            per_class: r.per_class_accuracy,
            minor_classes: minor,
            minor_mean,
        })
    }

    /// Retrains on b/2 real + b/2 translated batches and evaluates on the
    /// real test split.
    pub fn retrain(
        &self,
        data: &Datasets,
        pre: &Pretrained,
        generator: &Generator<f32>,
        transformed: &Corpus,
        mode: Mode,
        seed: u64,
    ) -> Result<RunResult> {
        let real = self.imbalanced_real(data, seed)?;
        let cfg = self.config.phase(&self.config.retrain, seed);
        let out = retrain_classifier(
            &real,
            transformed,
            data.get(Domain::Real, Split::Test),
            &cfg,
            Some(&pre.f_r),
        )?;
        let preservation = self.preservation(data, pre, generator)?;
        let step = Generator::load(&self.generator_path(mode, seed))
            .map(|(_, s)| s.step)
            .unwrap_or(0);
        let stamp = ModelStamp { seed, step };
        out.classifier.save(
            &self
                .run_dir(mode.tag(), seed)
                .join("checkpoints")
                .join("classifier.lcgan"),
            stamp,
        )?;
        let mut eval = out.report.with_metadata(RunMetadata {
            seed,
            config_hash: self.config.run_hash(mode.tag(), seed),
            checkpoint_step: step,
        });
        eval.label_preservation_rate = Some(preservation.overall);
        let reports = self.run_dir(mode.tag(), seed).join("reports");
        eval.save(&reports.join("eval.json"))?;
        std::fs::write(
            reports.join("preservation.json"),
            serde_json::to_string_pretty(&preservation)? + "\n",
        )?;
        if !out.warnings.is_empty() {
            std::fs::write(reports.join("warnings.txt"), out.warnings.join("\n") + "\n")?;
        }
        Ok(RunResult {
            method: mode.tag().to_string(),
            seed,
            eval,
            preservation: Some(preservation),
        })
    }

    /// Real-only retraining under the same schedule.
    pub fn baseline(&self, data: &Datasets, seed: u64) -> Result<RunResult> {
        let real = self.imbalanced_real(data, seed)?;
        let cfg = self.config.phase(&self.config.retrain, seed);
        let out = baseline_classifier(&real, data.get(Domain::Real, Split::Test), &cfg)?;
        out.classifier.save(
            &self
                .run_dir(BASELINE, seed)
                .join("checkpoints")
                .join("classifier.lcgan"),
            ModelStamp { seed, step: 0 },
        )?;
        let eval = out.report.with_metadata(RunMetadata {
            seed,
            config_hash: self.config.run_hash(BASELINE, seed),
            checkpoint_step: 0,
        });
        eval.save(&self.eval_path(BASELINE, seed))?;
        Ok(RunResult {
            method: BASELINE.to_string(),
            seed,
            eval,
            preservation: None,
        })
    }

    fn grid_items(&self, data: &Datasets) -> Vec<usize> {
        let test = data.get(Domain::Simulated, Split::Test);
        let mut picked = Vec::new();
        for class in 0..test.class_count {
            picked.extend(
                test.items
                    .iter()
                    .enumerate()
                    .filter(|(_, i)| i.label == class)
                    .map(|(k, _)| k)
                    .take(self.config.grid_items_per_class),
            );
        }
        picked
    }

    /// One row per picked simulated test item: the source image followed by
    /// each generator's translation.
    fn render_grid(&self, data: &Datasets, generators: &[&Generator<f32>], path: &Path) -> Result<()> {
        let test = data.get(Domain::Simulated, Split::Test);
        let picked = self.grid_items(data);
        let items = Corpus::new(
            test.name.clone(),
            test.domain,
            test.class_count,
            test.image_shape,
            picked.iter().map(|&k| test.items[k].clone()).collect(),
        )?;
        let translated = generators
            .iter()
            .map(|g| translate_corpus(g, &items))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(items.len());
        let mut captions = Vec::with_capacity(items.len());
        for (i, item) in items.items.iter().enumerate() {
            let mut row = vec![item.pixels.clone()];
            for t in &translated {
                row.push(Image::new(items.image_shape, t[i].clone())?);
            }
            rows.push(row);
            captions.push(format!("class {}", item.label));
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        render_image_grid(&rows, &captions, path)?;
        Ok(())
    }

    /// Runs every phase for each seed: pretraining, the baseline, and for
    /// each mode training, transformation, retraining and evaluation. The
    /// summary table keeps rows of runs not repeated here.
    pub fn run_pipeline(&self, modes: &[Mode], seeds: &[u64], force: bool) -> Result<Vec<RunResult>> {
        let data = phase("load data", self.load_data())?;
        let mut results = Vec::new();
        for &seed in seeds {
            let pre = phase("pretrain", self.pretrain(&data, seed, force))?;
            results.push(phase("baseline", self.baseline(&data, seed))?);
            for &mode in modes {
                let g = phase("train", self.train(&data, &pre, mode, seed, force))?;
                let t = phase("transform", self.transform(&data, &g, mode, seed))?;
                results.push(phase("retrain", self.retrain(&data, &pre, &g, &t, mode, seed))?);
                let grid = self.run_dir(mode.tag(), seed).join("grids").join("translations.png");
                phase("grids", self.render_grid(&data, &[&g], &grid))?;
            }
        }
        phase("summary", self.update_summary(&results))?;
        Ok(results)
    }

    /// Merges results into the summary table, replacing rows of the same
    /// (method, seed).
    pub fn update_summary(&self, results: &[RunResult]) -> Result<()> {
        let path = self.summary_path();
        std::fs::create_dir_all(self.out_dir())?;
        let mut rows = if path.exists() {
            read_summary_csv(&path)?
        } else {
            Vec::new()
        };
        rows.retain(|r| !results.iter().any(|n| n.method == r.method && n.seed == r.seed));
        for r in results {
            for (class, &accuracy) in r.eval.per_class_accuracy.iter().enumerate() {
                rows.push(SummaryRow {
                    method: r.method.clone(),
                    reduction_rate: self.config.imbalance.reduction_rate,
                    class,
                    accuracy,
                    seed: r.seed,
                });
            }
        }
        rows.sort_by(|a, b| (&a.method, a.seed, a.class).cmp(&(&b.method, b.seed, b.class)));
        write_summary_csv(&path, &rows)
    }

    /// Regenerates one grid per seed (source images, then one column per
    /// trained method) and a markdown table of mean per-class accuracy and
    /// label preservation.
    pub fn report(&self) -> Result<Vec<PathBuf>> {
        let modes = [Mode::Simgan, Mode::Cyclegan, Mode::LabelCyclegan];
        let mut by_seed: BTreeMap<u64, Vec<Mode>> = BTreeMap::new();
        for mode in modes {
            let dir = self.out_dir().join(mode.tag());
            let Ok(entries) = std::fs::read_dir(&dir) else { continue };
            for e in entries.flatten() {
                let name = e.file_name().to_string_lossy().into_owned();
                if let Some(seed) = name.strip_prefix("seed-").and_then(|s| s.parse().ok()) {
                    if self.generator_path(mode, seed).exists() {
                        by_seed.entry(seed).or_default().push(mode);
                    }
                }
            }
        }
        if by_seed.is_empty() {
            return Err(Error::Config(format!(
                "no trained generator checkpoints under {}; run `pipeline` (or `train`) first",
                self.out_dir().display()
            )));
        }
        let data = self.load_data()?;
        let dir = self.out_dir().join("report");
        std::fs::create_dir_all(&dir)?;
        let mut written = Vec::new();
        for (&seed, modes) in &by_seed {
            let gens = modes
                .iter()
                .map(|&m| Generator::load(&self.generator_path(m, seed)).map(|(g, _)| g))
                .collect::<Result<Vec<_>>>()?;
            let path = dir.join(format!("grid-seed-{seed}.png"));
            self.render_grid(&data, &gens.iter().collect::<Vec<_>>(), &path)?;
            written.push(path);
        }
        let table = self.markdown_summary(&by_seed)?;
        let path = dir.join("summary.md");
        std::fs::write(&path, table)?;
        written.push(path);
        Ok(written)
    }

    fn markdown_summary(&self, by_seed: &BTreeMap<u64, Vec<Mode>>) -> Result<String> {
        let rows = if self.summary_path().exists() {
            read_summary_csv(&self.summary_path())?
        } else {
            Vec::new()
        };
        let classes = self.config.data.real.class_count;
        let minor = &self.config.imbalance.minor_classes;
        let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
        methods.sort();
        methods.dedup();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# Retrained classifier accuracy\n\nReduction rate {}, minor classes {:?}. Mean ± sd over seeds.\n",
            self.config.imbalance.reduction_rate, minor
        );
        let header: Vec<String> = (0..classes)
            .map(|c| {
                if minor.contains(&c) {
                    format!("class {c} (minor)")
                } else {
                    format!("class {c}")
                }
            })
            .collect();
        let _ = writeln!(s, "| method | seeds | {} |", header.join(" | "));
        let _ = writeln!(s, "|---|---|{}", "---|".repeat(classes));
        for m in &methods {
            let mut cells = Vec::new();
            let mut seeds = 0;
            for c in 0..classes {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| &r.method == m && r.class == c)
                    .map(|r| r.accuracy)
                    .collect();
                seeds = seeds.max(v.len());
                cells.push(mean_sd(&v));
            }
            let _ = writeln!(s, "| {m} | {seeds} | {} |", cells.join(" | "));
        }
        let _ = writeln!(s, "\n# Label preservation (simulated test split)\n");
        let _ = writeln!(s, "| method | seed | overall | minor mean |");
        let _ = writeln!(s, "|---|---|---|---|");
        for (&seed, modes) in by_seed {
            for m in modes {
                let p = self.run_dir(m.tag(), seed).join("reports").join("preservation.json");
                if let Ok(text) = std::fs::read_to_string(&p) {
                    let r: PreservationReport = serde_json::from_str(&text)?;
                    let _ = writeln!(s, "| {} | {seed} | {:.4} | {:.4} |", m.tag(), r.overall, r.minor_mean);
                }
            }
        }
        Ok(s)
    }
}

fn mean_sd(v: &[f64]) -> String {
    if v.is_empty() {
        return "–".into();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    format!("{mean:.4} ± {:.4}", var.sqrt())
}

/// Parameters of a discriminator checkpoint, for inspection tools.
pub fn load_discriminator(path: &Path) -> Result<Discriminator<f32>> {
    Ok(Discriminator::load(path)?.0)
}

/// Reads the metadata block of any archive file.
pub fn archive_metadata(path: &Path) -> Result<serde_json::Value> {
    Ok(Archive::load(path)?.metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tiny end-to-end config: 2 classes, a few items, one epoch per phase.
    pub(crate) fn tiny(out: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.out_dir = out.to_path_buf();
        c.seeds = vec![1];
        for m in [&mut c.data.real, &mut c.data.sim] {
            m.class_count = 2;
            m.item_count_per_class = vec![12, 12];
        }
        c.data.validation_per_class = 4;
        c.data.test_per_class = 4;
        c.imbalance = ImbalanceSpec::new([1], 0.5);
        let arch = Architecture {
            generator_channels: 4,
            down_stages: 1,
            res_blocks: 1,
            discriminator_channels: 4,
            discriminator_stages: 2,
            classifier_channels: [4, 4],
            ..Default::default()
        };
        for t in [&mut c.pretrain_r, &mut c.pretrain_s, &mut c.gan, &mut c.retrain] {
            t.epochs = 1;
            t.batch_size = 4;
            t.arch = arch.clone();
        }
        c
    }

    #[test]
    fn desk_preset_validates_and_round_trips() {
        let c = ExperimentConfig::desk();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.gan_config(Mode::Cyclegan, 7).minor_classes, [2].into());
        assert_ne!(c.run_hash("cyclegan", 1), c.run_hash("cyclegan", 2));
        let moved = ExperimentConfig {
            out_dir: "elsewhere".into(),
            ..c.clone()
        };
        assert_eq!(c.run_hash("cyclegan", 1), moved.run_hash("cyclegan", 1));
    }

    #[test]
    fn manifests_from_files_and_field_errors() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::desk();
        let mut table: toml::Table = toml::from_str(&c.to_toml()).unwrap();
        let data = table.get_mut("data").unwrap().as_table_mut().unwrap();
        data.remove("real");
        data.insert("real_manifest".into(), "real.json".into());
        let text = toml::to_string(&table).unwrap();
        std::fs::write(dir.path().join("real.json"), c.data.real.to_json()).unwrap();
        assert_eq!(ExperimentConfig::from_toml_at(&text, dir.path()).unwrap(), c);

        let broken = c
            .data
            .real
            .to_json()
            .replace("\"class_count\": 3", "\"class_count\": \"three\"");
        std::fs::write(dir.path().join("real.json"), broken).unwrap();
        let err = ExperimentConfig::from_toml_at(&text, dir.path())
            .unwrap_err()
            .to_string();
        assert!(err.contains("class_count"), "{err}");
    }

    #[test]
    fn data_build_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let e = Experiment::new(tiny(dir.path())).unwrap();
        match e.build_data(false).unwrap() {
            DataStatus::Written(files) => assert_eq!(files.len(), 6),
            other => panic!("{other:?}"),
        }
        assert_eq!(e.build_data(false).unwrap(), DataStatus::UpToDate);
        assert!(matches!(e.build_data(true).unwrap(), DataStatus::Written(_)));
        let d = e.load_data().unwrap();
        assert_eq!(d.get(Domain::Simulated, Split::Test).len(), 8);
    }

    #[test]
    fn pipeline_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let e = Experiment::new(tiny(dir.path())).unwrap();
        assert!(matches!(
            e.run_pipeline(&[Mode::Cyclegan], &[1], false),
            Err(Error::Phase { .. })
        ));
        assert!(e.report().is_err());
        e.build_data(false).unwrap();
        let results = e.run_pipeline(&[Mode::Cyclegan, Mode::Simgan], &[1], false).unwrap();
        assert_eq!(results.len(), 3);
        for sub in ["checkpoints", "logs", "reports", "grids"] {
            assert!(e.run_dir("cyclegan", 1).join(sub).is_dir(), "{sub}");
        }
        let rows = read_summary_csv(&e.summary_path()).unwrap();
        assert_eq!(rows.len(), 3 * 2);
        let log = std::fs::read_to_string(e.log_path(Mode::Simgan, 1)).unwrap();
        assert!(log
            .lines()
            .filter(|l| !l.contains("\"record\""))
            .all(|l| l.contains("\"cycle\":0.0")));

        let first = e.report().unwrap();
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let again = e.report().unwrap();
        assert_eq!(first, again);
        for (p, b) in again.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(p).unwrap(), b);
        }
        // completed phases are reused
        let eval_before = std::fs::read(e.eval_path("cyclegan", 1)).unwrap();
        e.run_pipeline(&[Mode::Cyclegan], &[1], false).unwrap();
        assert_eq!(std::fs::read(e.eval_path("cyclegan", 1)).unwrap(), eval_before);
        assert_eq!(read_summary_csv(&e.summary_path()).unwrap().len(), 6);
    }
}
