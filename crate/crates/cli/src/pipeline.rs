//! Stage implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use oaprog::cohort::{load_cohort, write_cohort, CohortTable};
use oaprog::dataset::{prepare_dataset, PreparedCohort};
use oaprog::eval::{
    bbc_cv, learning_curve, median_run, roc_curve, run_cv, score_configuration, tune_grid, CurveMode, CurvePlan, Learner,
    PredictionStore, ScoreSummary,
};
use oaprog::explain::{forest_shap, summarize_impact, OutputId};
use oaprog::forest::{ForestConfig, RandomForestModel};
use oaprog::labeling::ProgressionClass;
use oaprog::preprocess::{fit_transform, FittedTransform};
use oaprog::rfe::rfe_cross_validated;
use oaprog::select::{conventional_inputs, conventional_select, ml_label_select, ml_prob_select, selection_report, SelectionReport};
use oaprog::seed;
use oaprog::strategies::{train_strategy, StrategyModel};
use oaprog::synth::generate_cohort;
use serde::{Deserialize, Serialize};

use crate::artifact::{fmt, ArtifactDir, Provenance};
use crate::config::{RunConfig, SelectMode};
use crate::error::{CliError, StageContext};

pub const DATA_FILE: &str = "cohort.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const TUNE_PREDICTIONS_FILE: &str = "tune_predictions.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Synth,
    Label,
    Preprocess,
    Train,
    Evaluate,
    Curve,
    Tune,
    Bbc,
    Rfe,
    Explain,
    Select,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Synth,
        Stage::Label,
        Stage::Preprocess,
        Stage::Train,
        Stage::Evaluate,
        Stage::Curve,
        Stage::Tune,
        Stage::Bbc,
        Stage::Rfe,
        Stage::Explain,
        Stage::Select,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Label => "label",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Curve => "curve",
            Stage::Tune => "tune",
            Stage::Bbc => "bbc",
            Stage::Rfe => "rfe",
            Stage::Explain => "explain",
            Stage::Select => "select",
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_names: Vec<String>,
    pub transform: FittedTransform,
    pub model: StrategyModel,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub out: ArtifactDir,
}

fn class_name(c: ProgressionClass) -> String {
    c.name().to_string()
}

impl Pipeline {
    pub fn new(config: RunConfig, out: &Path) -> Result<Pipeline, CliError> {
        config.validate()?;
        let provenance = Provenance {
            config_hash: config.hash()?,
            seed: config.seed,
        };
        Ok(Pipeline {
            out: ArtifactDir::create(out, provenance)?,
            config,
        })
    }

    fn data_paths(&self) -> (PathBuf, PathBuf) {
        let p = &self.config.paths;
        (
            p.data.clone().unwrap_or_else(|| self.out.path(DATA_FILE)),
            p.metadata.clone().unwrap_or_else(|| self.out.path(METADATA_FILE)),
        )
    }

    pub fn load_table(&self, stage: &str) -> Result<CohortTable, CliError> {
        let (data, meta) = self.data_paths();
        load_cohort(&data, &meta).stage(stage)
    }

    pub fn prepared(&self, stage: &str) -> Result<(CohortTable, PreparedCohort), CliError> {
        let table = self.load_table(stage)?;
        let prepared = prepare_dataset(&table, self.config.periods, self.config.pain_combination, &self.config.preprocess).stage(stage)?;
        Ok((table, prepared))
    }

    fn model_seed(&self) -> u64 {
        seed::derive(self.config.seed, "model", &[0])
    }

    pub fn run(&self, stage: Stage) -> Result<Vec<PathBuf>, CliError> {
        match stage {
            Stage::Synth => self.synth(),
            Stage::Label => self.label(),
            Stage::Preprocess => self.preprocess(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Curve => self.curve(),
            Stage::Tune => self.tune(),
            Stage::Bbc => self.bbc(),
            Stage::Rfe => self.rfe(),
            Stage::Explain => self.explain(),
            Stage::Select => self.select(self.config.select.mode),
        }
    }

    /// Every stage in order; `synth` is skipped when a data file is configured.
    pub fn run_all(&self) -> Result<Vec<PathBuf>, CliError> {
        let mut files = Vec::new();
        for stage in Stage::ALL {
            if stage == Stage::Synth && self.config.paths.data.is_some() {
                continue;
            }
            if stage == Stage::Select {
                for mode in [SelectMode::Conventional, SelectMode::MlL, SelectMode::MlP] {
                    files.extend(self.select(mode)?);
                }
                continue;
            }
            files.extend(self.run(stage)?);
        }
        Ok(files)
    }

    pub fn synth(&self) -> Result<Vec<PathBuf>, CliError> {
        let mut config = self.config.synth.clone();
        config.seed = self.config.seed;
        let cohort = generate_cohort(&config).map_err(|e| CliError::Config(e.to_string()))?;
        let mut csv = Vec::new();
        write_cohort(&cohort.table, &cohort.metadata, &mut csv).stage("synth")?;
        let data = self.out.write_text(DATA_FILE, &String::from_utf8(csv).expect("utf-8 csv"))?;
        let meta_text = format!(
            "# config_hash = \"{}\"\n# seed = {}\n{}",
            self.out.provenance.config_hash,
            self.out.provenance.seed,
            cohort.metadata.to_toml().stage("synth")?
        );
        let meta = self.out.write_text(METADATA_FILE, &meta_text)?;
        let truth = self.out.write_json("ground_truth.json", "ground_truth", &cohort.truth)?;
        Ok(vec![data, meta, truth])
    }

    pub fn label(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("label")?;
        let rows: Vec<Vec<String>> = prepared
            .periods
            .iter()
            .zip(&prepared.dataset.classes)
            .map(|(p, c)| {
                vec![
                    p.id(),
                    p.patient.clone(),
                    p.start_tp.to_string(),
                    p.end_tp.to_string(),
                    class_name(*c),
                ]
            })
            .collect();
        let labels = self.out.write_table("labels.csv", &["period", "patient", "start", "end", "class"], &rows)?;
        let mut ex: Vec<Vec<String>> = prepared
            .exclusions
            .iter()
            .map(|e| vec![e.period.clone(), e.reason.to_string()])
            .collect();
        ex.extend(prepared.filtered_out.iter().map(|p| vec![p.clone(), "too_many_missing_attributes".into()]));
        let exclusions = self.out.write_table("exclusions.csv", &["period", "reason"], &ex)?;
        let dist = self.out.write_json("class_distribution.json", "class_distribution", &prepared.dataset.distribution)?;
        Ok(vec![labels, exclusions, dist])
    }

    pub fn preprocess(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("preprocess")?;
        let all: Vec<usize> = (0..prepared.dataset.len()).collect();
        let t = fit_transform(&prepared.dataset.frame, &all, &self.config.preprocess).stage("preprocess")?;
        let transform = self.out.write_json("transform.json", "fitted_transform", &t)?;
        let filter = self.out.write_json("filter_report.json", "filter_report", &prepared.filter)?;
        Ok(vec![transform, filter])
    }

    fn train_full(&self, stage: &str) -> Result<TrainedModel, CliError> {
        let (_, prepared) = self.prepared(stage)?;
        let ds = &prepared.dataset;
        let all: Vec<usize> = (0..ds.len()).collect();
        let transform = fit_transform(&ds.frame, &all, &self.config.preprocess).stage(stage)?;
        let x = transform.apply_rows(&ds.frame, &all);
        let config = self.config.forest.with_seed(self.model_seed());
        let model = train_strategy(self.config.strategy, &x, &ds.classes, &config, &ds.distribution).stage(stage)?;
        Ok(TrainedModel {
            feature_names: transform.feature_names(),
            transform,
            model,
        })
    }

    pub fn train(&self) -> Result<Vec<PathBuf>, CliError> {
        let trained = self.train_full("train")?;
        Ok(vec![self.out.write_json(MODEL_FILE, "strategy_model", &trained)?])
    }

    fn score_rows(store: &PredictionStore, summaries: &[ScoreSummary]) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (c, s) in summaries.iter().enumerate() {
            for r in &s.run_scores {
                rows.push(vec![
                    c.to_string(),
                    store.configs[c].label.clone(),
                    r.repeat.to_string(),
                    r.seed.to_string(),
                    fmt(r.score),
                ]);
            }
        }
        rows
    }

    pub fn evaluate(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("evaluate")?;
        let ds = &prepared.dataset;
        let learner = Learner::Forest {
            strategy: self.config.strategy,
            config: self.config.forest.clone(),
        };
        let store = run_cv(ds, &[learner], &self.config.cv_plan(), &self.config.preprocess).stage("evaluate")?;
        let summaries = (0..store.n_configs())
            .map(|c| score_configuration(&store, c))
            .collect::<oaprog::Result<Vec<_>>>()
            .stage("evaluate")?;
        let mut files = vec![
            self.out.write_json(PREDICTIONS_FILE, "prediction_store", &store)?,
            self.out.write_table(
                "scores.csv",
                &["config", "label", "repeat", "seed", "weighted_f1"],
                &Self::score_rows(&store, &summaries),
            )?,
            self.out.write_json("summary.json", "score_summary", &summaries)?,
        ];
        // ROC of the P and S probabilities of the median run
        let key = median_run(&store, 0).stage("evaluate")?;
        let run = store.run(key).expect("median run exists");
        for (name, bit) in [("p", 0usize), ("s", 1usize)] {
            let scores: Vec<f64> = run.predictions.iter().map(|p| if bit == 0 { p.p_p } else { p.p_s }).collect();
            let truth: Vec<bool> = store
                .truth
                .iter()
                .map(|c| if bit == 0 { c.label_pair().p } else { c.label_pair().s })
                .collect();
            let roc = roc_curve(&scores, &truth).stage("evaluate")?;
            let rows: Vec<Vec<String>> = std::iter::once(f64::INFINITY)
                .chain(roc.thresholds.iter().copied())
                .zip(&roc.points)
                .map(|(t, (fpr, tpr))| vec![fmt(t), fmt(*fpr), fmt(*tpr)])
                .collect();
            files.push(self.out.write_table(&format!("roc_{name}.csv"), &["threshold", "fpr", "tpr"], &rows)?);
            files.push(self.out.write_json(&format!("roc_{name}.json"), "roc_curve", &roc)?);
        }
        Ok(files)
    }

    pub fn curve(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("curve")?;
        let learner = Learner::Forest {
            strategy: self.config.strategy,
            config: self.config.forest.clone(),
        };
        let mut files = Vec::new();
        let mut curves = Vec::new();
        for (mode, name) in [
            (CurveMode::FullImbalanced, "full_imbalanced"),
            (CurveMode::BalancedDownsample, "balanced_downsample"),
        ] {
            let plan = CurvePlan {
                fractions: self.config.curve.fractions.clone(),
                mode,
                n_samples: self.config.curve.n_samples,
                per_class: self.config.curve.per_class,
            };
            let curve = learning_curve(&prepared.dataset, &learner, &self.config.cv_plan(), &plan, &self.config.preprocess)
                .stage("curve")?;
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| vec![fmt(p.fraction), fmt(p.mean_train_size), fmt(p.median), fmt(p.mad), fmt(p.min), fmt(p.max)])
                .collect();
            files.push(self.out.write_table(
                &format!("curve_{name}.csv"),
                &["fraction", "train_size", "median", "mad", "min", "max"],
                &rows,
            )?);
            curves.push(curve);
        }
        files.push(self.out.write_json("curves.json", "learning_curves", &curves)?);
        Ok(files)
    }

    fn grid(&self) -> Vec<ForestConfig> {
        oaprog::eval::forest_grid(&self.config.grid.trees, &self.config.grid.depths, &self.config.forest)
    }

    pub fn tune(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("tune")?;
        let grid = self.grid();
        let (result, store) = tune_grid(&prepared.dataset, self.config.strategy, &grid, &self.config.cv_plan(), &self.config.preprocess)
            .stage("tune")?;
        let rows: Vec<Vec<String>> = result
            .summaries
            .iter()
            .enumerate()
            .map(|(c, s)| {
                vec![
                    c.to_string(),
                    store.configs[c].label.clone(),
                    fmt(s.median),
                    fmt(s.ci_low),
                    fmt(s.ci_high),
                    fmt(s.mad),
                    (c == result.best).to_string(),
                ]
            })
            .collect();
        Ok(vec![
            self.out.write_json(TUNE_PREDICTIONS_FILE, "prediction_store", &store)?,
            self.out.write_table(
                "tune_scores.csv",
                &["config", "label", "median", "ci_low", "ci_high", "mad", "best"],
                &rows,
            )?,
            self.out.write_json("tune_summary.json", "tune_result", &result)?,
        ])
    }

    pub fn bbc(&self) -> Result<Vec<PathBuf>, CliError> {
        let (store, _): (PredictionStore, _) = self.out.read_json(TUNE_PREDICTIONS_FILE, "prediction_store")?;
        let result = bbc_cv(&store, self.config.bbc.n_boot, seed::derive(self.config.seed, "bbc", &[])).stage("bbc")?;
        Ok(vec![self.out.write_json("bbc.json", "bbc_result", &result)?])
    }

    pub fn rfe(&self) -> Result<Vec<PathBuf>, CliError> {
        let (_, prepared) = self.prepared("rfe")?;
        let report = rfe_cross_validated(
            &prepared.dataset,
            self.config.strategy,
            &self.config.forest,
            &self.config.cv_plan(),
            &self.config.preprocess,
            self.config.rfe.inner_k,
        )
        .stage("rfe")?;
        let mut trace = Vec::new();
        for round in &report.rounds {
            for step in &round.trace.steps {
                trace.push(vec![
                    round.repeat.to_string(),
                    round.fold.to_string(),
                    step.features.len().to_string(),
                    fmt(step.score),
                    (step.features == round.trace.chosen).to_string(),
                ]);
            }
        }
        let rounds = report.rounds.len().to_string();
        let freq: Vec<Vec<String>> = report
            .frequency
            .iter()
            .map(|(name, n)| vec![name.clone(), n.to_string(), rounds.clone()])
            .collect();
        Ok(vec![
            self.out.write_table("rfe_trace.csv", &["repeat", "fold", "subset_size", "inner_score", "chosen"], &trace)?,
            self.out.write_table("rfe_frequency.csv", &["feature", "selected", "rounds"], &freq)?,
            self.out.write_json("rfe.json", "rfe_report", &report)?,
        ])
    }

    fn explain_targets(model: &StrategyModel) -> Vec<(&'static str, &RandomForestModel, OutputId)> {
        let bin = |output| OutputId { output, class: 1 };
        match model {
            StrategyModel::Duo(d) => vec![("p", &d.p_forest, bin(0)), ("s", &d.s_forest, bin(0))],
            StrategyModel::Multilabel { forest } => vec![("p", forest, bin(0)), ("s", forest, bin(1))],
            StrategyModel::Single { forest } => vec![
                ("class_p", forest, OutputId { output: 0, class: 1 }),
                ("class_s", forest, OutputId { output: 0, class: 2 }),
                ("class_ps", forest, OutputId { output: 0, class: 3 }),
            ],
            StrategyModel::OneVsRest { forests } => vec![
                ("class_p", &forests[1], bin(0)),
                ("class_s", &forests[2], bin(0)),
                ("class_ps", &forests[3], bin(0)),
            ],
        }
    }

    pub fn explain(&self) -> Result<Vec<PathBuf>, CliError> {
        let trained = if self.out.path(MODEL_FILE).exists() {
            self.out.read_json::<TrainedModel>(MODEL_FILE, "strategy_model")?.0
        } else {
            self.train_full("explain")?
        };
        let (_, prepared) = self.prepared("explain")?;
        let ds = &prepared.dataset;
        let n = match self.config.explain.max_instances {
            0 => ds.len(),
            m => m.min(ds.len()),
        };
        let idx: Vec<usize> = (0..n).collect();
        let x = trained.transform.apply_rows(&ds.frame, &idx);
        let mut files = Vec::new();
        let mut bases = Vec::new();
        for (name, forest, out) in Self::explain_targets(&trained.model) {
            let attributions = x
                .rows()
                .map(|row| forest_shap(forest, row, out))
                .collect::<oaprog::Result<Vec<_>>>()
                .stage("explain")?;
            let max_error = attributions
                .iter()
                .map(|a| (a.base_value + a.phi.iter().sum::<f64>() - a.prediction).abs())
                .fold(0.0, f64::max);
            bases.push(serde_json::json!({
                "target": name,
                "base_value": attributions.first().map(|a| a.base_value),
                "max_local_accuracy_error": max_error,
                "instances": n,
            }));
            let summary = summarize_impact(&attributions, &trained.feature_names);
            let impact: Vec<Vec<String>> = summary
                .ranking
                .iter()
                .enumerate()
                .map(|(r, f)| vec![(r + 1).to_string(), f.name.clone(), fmt(f.mean_abs_phi)])
                .collect();
            files.push(self.out.write_table(&format!("shap_impact_{name}.csv"), &["rank", "feature", "mean_abs_phi"], &impact)?);
            let scatter: Vec<Vec<String>> = summary
                .scatter
                .iter()
                .filter(|p| p.phi != 0.0)
                .map(|p| vec![ds.ids[p.instance].clone(), trained.feature_names[p.feature].clone(), fmt(p.value), fmt(p.phi)])
                .collect();
            files.push(self.out.write_table(&format!("shap_scatter_{name}.csv"), &["period", "feature", "value", "phi"], &scatter)?);
        }
        files.push(self.out.write_json("explain.json", "explain_summary", &bases)?);
        Ok(files)
    }

    pub fn select(&self, mode: SelectMode) -> Result<Vec<PathBuf>, CliError> {
        let (table, prepared) = self.prepared("select")?;
        let ds = &prepared.dataset;
        let inputs: Vec<_> = prepared.periods.iter().map(|p| conventional_inputs(&table, p)).collect();
        let conventional = conventional_select(&inputs);
        let conventional_count = conventional.mask.iter().filter(|&&b| b).count();

        let model_predictions = || -> Result<Vec<oaprog::eval::Prediction>, CliError> {
            let (store, _): (PredictionStore, _) = self.out.read_json(PREDICTIONS_FILE, "prediction_store")?;
            if store.instance_ids != ds.ids {
                return Err(CliError::StageMessage {
                    stage: "select".into(),
                    message: "prediction store does not match the current dataset".into(),
                });
            }
            let key = median_run(&store, 0).stage("select")?;
            Ok(store.run(key).expect("median run exists").predictions.clone())
        };
        let (mask, target) = match mode {
            SelectMode::Conventional => (conventional.mask.clone(), conventional_count),
            SelectMode::MlL => {
                let preds = model_predictions()?;
                let classes: Vec<ProgressionClass> = preds.iter().map(|p| p.class).collect();
                let mask = ml_label_select(&classes);
                let n = mask.iter().filter(|&&b| b).count();
                (mask, n)
            }
            SelectMode::MlP => {
                let preds = model_predictions()?;
                let target = if self.config.select.match_count {
                    conventional_count
                } else {
                    self.config.select.target.ok_or_else(|| {
                        CliError::Config("select.target is required when match_count is off".into())
                    })?
                };
                let p_p: Vec<f64> = preds.iter().map(|p| p.p_p).collect();
                let p_s: Vec<f64> = preds.iter().map(|p| p.p_s).collect();
                (ml_prob_select(&p_p, &p_s, &ds.ids, target).stage("select")?, target)
            }
        };
        let report: SelectionReport = selection_report(&mask, &ds.classes).stage("select")?;
        let mut rows: Vec<Vec<String>> = report
            .per_class
            .iter()
            .map(|c| vec![class_name(c.class), c.count.to_string(), fmt(c.share), fmt(c.recall)])
            .collect();
        rows.push(vec!["not_N".into(), (report.selected - report.per_class[0].count).to_string(), fmt(1.0 - report.n_share()), fmt(report.progressive_recall)]);
        let name = mode.name().replace('-', "_");
        let selected: Vec<&String> = ds.ids.iter().zip(&mask).filter(|(_, &m)| m).map(|(id, _)| id).collect();
        let unevaluable: Vec<&String> = conventional.unevaluable.iter().map(|&i| &ds.ids[i]).collect();
        let detail = serde_json::json!({
            "mode": mode.name(),
            "target": target,
            "conventional_count": conventional_count,
            "report": report,
            "selected": selected,
            "conventional_unevaluable": unevaluable,
        });
        Ok(vec![
            self.out.write_table(&format!("selection_{name}.csv"), &["class", "count", "share", "recall"], &rows)?,
            self.out.write_json(&format!("selection_{name}.json"), "selection", &detail)?,
        ])
    }
}
