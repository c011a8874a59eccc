//! Python bindings: datasets, models, baselines and metrics.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

use hopcheck::corpus::{self, VeracityLabel};
use hopcheck::evaluate::{self, MetricsReport};
use hopcheck::perturb::{self, CapitalizationRecognizer, ReplacementPool, Setting};
use hopcheck::reasoner::{self, PredictionRecord, DEFAULT_TOP_K};
use hopcheck::train::{self, ExperimentConfig, StageData};
use hopcheck::{baselines, rng};

fn err(e: hopcheck::Error) -> PyErr {
    match e {
        hopcheck::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn label(s: &str) -> PyResult<VeracityLabel> {
    s.parse().map_err(err)
}

/// One claim with its sentences and gold evidence chains.
#[pyclass(module = "hopcheck_py", name = "Example", from_py_object)]
#[derive(Clone)]
pub struct PyExample {
    inner: corpus::Example,
}

#[pymethods]
impl PyExample {
    #[new]
    #[pyo3(signature = (id, claim, label, sentences, chains, speaker = String::new()))]
    fn new(
        id: String,
        claim: String,
        label: &str,
        sentences: Vec<String>,
        chains: Vec<Vec<usize>>,
        speaker: String,
    ) -> PyResult<Self> {
        let n = sentences.len();
        if let Some(bad) = chains.iter().flatten().find(|&&i| i >= n) {
            return Err(PyValueError::new_err(format!(
                "evidence index {bad} out of range for {n} sentences"
            )));
        }
        Ok(PyExample {
            inner: corpus::Example {
                id,
                claim,
                speaker,
                label: self::label(label)?,
                sentences,
                chains,
                origin_map: (0..n).collect(),
            },
        })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn claim(&self) -> &str {
        &self.inner.claim
    }

    #[getter]
    fn speaker(&self) -> &str {
        &self.inner.speaker
    }

    #[getter]
    fn label(&self) -> &'static str {
        self.inner.label.as_str()
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.inner.sentences.clone()
    }

    #[getter]
    fn chains(&self) -> Vec<Vec<usize>> {
        self.inner.chains.clone()
    }

    fn gold_evidence(&self) -> Vec<usize> {
        self.inner.gold_evidence().into_iter().collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Example(id={:?}, label={:?}, sentences={})",
            self.inner.id,
            self.label(),
            self.inner.sentences.len()
        )
    }
}

/// Label distribution, node importance and selected evidence for one graph.
#[pyclass(module = "hopcheck_py", name = "Prediction", from_py_object)]
#[derive(Clone)]
pub struct PyPrediction {
    inner: reasoner::Prediction,
}

#[pymethods]
impl PyPrediction {
    #[getter]
    fn label(&self) -> &'static str {
        self.inner.label().as_str()
    }

    #[getter]
    fn label_dist(&self) -> [f64; 3] {
        self.inner.label_dist
    }

    #[getter]
    fn importance(&self) -> Vec<f64> {
        self.inner.importance.clone()
    }

    #[getter]
    fn evidence(&self) -> Vec<usize> {
        self.inner.evidence.clone()
    }

    #[getter]
    fn hop_attention(&self) -> Option<Vec<Vec<Vec<f64>>>> {
        self.inner.hop_attention.clone()
    }

    #[getter]
    fn confidence(&self) -> f64 {
        self.inner.confidence()
    }

    /// Copy with evidence re-selected at top-`k`.
    fn with_top_k(&self, k: usize) -> Self {
        PyPrediction {
            inner: evaluate::with_top_k(std::slice::from_ref(&self.inner), k).remove(0),
        }
    }

    fn to_dict(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &PredictionRecord::new(id, &self.inner))
    }

    fn __repr__(&self) -> String {
        format!(
            "Prediction(label={:?}, evidence={:?})",
            self.label(),
            self.inner.evidence
        )
    }
}

/// Encoder plus graph reasoner.
#[pyclass(module = "hopcheck_py", name = "Model")]
pub struct PyModel {
    inner: reasoner::Model,
}

#[pymethods]
impl PyModel {
    /// Loads a checkpoint directory written by `save` or the `train` command.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: reasoner::Model::load(&path).map_err(err)?,
        })
    }

    /// Untrained tiny-backend model with a vocabulary built from `examples`.
    #[staticmethod]
    #[pyo3(signature = (examples, hops = 3, seed = hopcheck::DEFAULT_SEED, sentence_ids = false))]
    fn tiny(
        examples: Vec<PyExample>,
        hops: usize,
        seed: u64,
        sentence_ids: bool,
    ) -> PyResult<Self> {
        let cfg = ExperimentConfig {
            stages: vec![train::Stage::new("data", 1)],
            hops,
            seed,
            sentence_ids,
            ..Default::default()
        };
        let mut data = BTreeMap::new();
        data.insert(
            "data".to_string(),
            StageData {
                train: examples.into_iter().map(|e| e.inner).collect(),
                dev: Vec::new(),
            },
        );
        Ok(PyModel {
            inner: train::build_model(&cfg, &data).map_err(err)?,
        })
    }

    #[pyo3(signature = (example, k = DEFAULT_TOP_K))]
    fn predict(&self, example: &PyExample, k: usize) -> PyResult<PyPrediction> {
        Ok(PyPrediction {
            inner: self.inner.predict(&example.inner, k).map_err(err)?,
        })
    }

    /// Prediction with the hop layers bypassed.
    #[pyo3(signature = (example, k = DEFAULT_TOP_K))]
    fn predict_single_step(&self, example: &PyExample, k: usize) -> PyResult<PyPrediction> {
        let batch = self.inner.nodes(&example.inner).map_err(err)?;
        Ok(PyPrediction {
            inner: reasoner::single_step(&self.inner, &batch, k).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.params.num_scalars()
    }

    #[getter]
    fn hops(&self) -> usize {
        self.inner.config.hops.num_hops
    }
}

/// Loads a canonical or chain-instance file.
#[pyfunction]
fn load_examples(path: PathBuf) -> PyResult<Vec<PyExample>> {
    Ok(corpus::load_examples(&path)
        .map_err(err)?
        .into_iter()
        .map(|inner| PyExample { inner })
        .collect())
}

/// Violations in a canonical file, one description each.
#[pyfunction]
fn validate_dataset(path: PathBuf) -> PyResult<Vec<String>> {
    let articles: Vec<corpus::ArticleInstance> = corpus::read_jsonl(&path).map_err(err)?;
    Ok(corpus::validate_dataset(&articles)
        .iter()
        .map(ToString::to_string)
        .collect())
}

#[pyfunction]
fn compute_stats(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let stats = corpus::compute_stats(&corpus::load_canonical(&path).map_err(err)?).map_err(err)?;
    to_py(py, &stats)
}

/// Writes the `setting` version ("full", "even" or "adversarial") of a dataset file.
#[pyfunction]
#[pyo3(signature = (input, output, setting, seed = hopcheck::DEFAULT_SEED, pool = None))]
fn apply_setting(
    input: PathBuf,
    output: PathBuf,
    setting: &str,
    seed: u64,
    pool: Option<PathBuf>,
) -> PyResult<usize> {
    let setting: Setting = setting.parse().map_err(err)?;
    let records = corpus::load_records(&input).map_err(err)?;
    let pool = match pool {
        Some(p) => Some(ReplacementPool::load(&p, &CapitalizationRecognizer).map_err(err)?),
        None => None,
    };
    let (out, fallbacks) = perturb::apply_setting(
        &records,
        setting,
        seed,
        pool.as_ref(),
        &CapitalizationRecognizer,
    )
    .map_err(err)?;
    out.write(&output).map_err(err)?;
    Ok(fallbacks.len())
}

#[pyfunction]
fn ne_overlap(evidence: Vec<String>, non_evidence: Vec<String>) -> f64 {
    perturb::ne_overlap(&evidence, &non_evidence, &CapitalizationRecognizer)
}

#[pyfunction]
fn select_evidence(importance: Vec<f64>, k: usize) -> Vec<usize> {
    reasoner::select_evidence(&importance, k)
}

#[pyfunction]
fn aggregate_label(node_dists: Vec<[f64; 3]>, importance: Vec<f64>) -> PyResult<[f64; 3]> {
    reasoner::aggregate_label(&node_dists, &importance).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n_sentences, seed = hopcheck::DEFAULT_SEED))]
fn random_predict(n_sentences: usize, seed: u64) -> PyPrediction {
    PyPrediction {
        inner: baselines::random_predict(n_sentences, &mut rng::seeded(seed)),
    }
}

/// TF-IDF n-gram features with a multinomial Naive Bayes classifier.
#[pyclass(module = "hopcheck_py", name = "TfidfNb")]
pub struct PyTfidfNb {
    inner: baselines::TfidfNb,
}

#[pymethods]
impl PyTfidfNb {
    #[staticmethod]
    fn fit(examples: Vec<PyExample>) -> PyResult<Self> {
        let train: Vec<corpus::Example> = examples.into_iter().map(|e| e.inner).collect();
        Ok(PyTfidfNb {
            inner: baselines::TfidfNb::fit(&train).map_err(err)?,
        })
    }

    fn predict(&self, example: &PyExample) -> PyPrediction {
        PyPrediction {
            inner: self.inner.predict(&example.inner),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.space.dim()
    }
}

/// Trains from an experiment TOML; returns the best model and the history.
#[pyfunction]
fn train_from_config(py: Python<'_>, config: PathBuf) -> PyResult<(PyModel, Py<PyAny>)> {
    let cfg = ExperimentConfig::load(&config).map_err(err)?;
    let mut data = BTreeMap::new();
    for (name, paths) in &cfg.datasets {
        let train = corpus::load_examples(&paths.train).map_err(err)?;
        let dev = match &paths.dev {
            Some(p) => corpus::load_examples(p).map_err(err)?,
            None => Vec::new(),
        };
        data.insert(name.clone(), StageData { train, dev });
    }
    let outcome = py.detach(|| train::run_regime(&cfg, &data)).map_err(err)?;
    let history = to_py(py, &outcome.history)?;
    Ok((
        PyModel {
            inner: outcome.model,
        },
        history,
    ))
}

fn unwrap_all(p: Vec<PyPrediction>) -> Vec<reasoner::Prediction> {
    p.into_iter().map(|p| p.inner).collect()
}

fn examples(g: Vec<PyExample>) -> Vec<corpus::Example> {
    g.into_iter().map(|e| e.inner).collect()
}

/// Macro-F1 and accuracy over label strings.
#[pyfunction]
fn label_metrics(predicted: Vec<String>, gold: Vec<String>) -> PyResult<(f64, f64)> {
    let p = predicted
        .iter()
        .map(|s| label(s))
        .collect::<PyResult<Vec<_>>>()?;
    let g = gold
        .iter()
        .map(|s| label(s))
        .collect::<PyResult<Vec<_>>>()?;
    let m = evaluate::label_metrics(&p, &g).map_err(err)?;
    Ok((m.macro_f1, m.accuracy))
}

/// Macro-averaged evidence (F1, precision, recall).
#[pyfunction]
fn evidence_metrics(
    predicted: Vec<Vec<usize>>,
    gold_chains: Vec<Vec<Vec<usize>>>,
) -> PyResult<(f64, f64, f64)> {
    let m = evaluate::evidence_metrics(&predicted, &gold_chains).map_err(err)?;
    Ok((m.f1, m.precision, m.recall))
}

#[pyfunction]
fn fever_score(predictions: Vec<PyPrediction>, gold: Vec<PyExample>) -> PyResult<f64> {
    evaluate::fever_score(&unwrap_all(predictions), &examples(gold)).map_err(err)
}

/// Full metric report as a dict.
#[pyfunction]
#[pyo3(signature = (predictions, gold, k = None))]
fn metrics_report(
    py: Python<'_>,
    predictions: Vec<PyPrediction>,
    gold: Vec<PyExample>,
    k: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let m = MetricsReport::compute(&unwrap_all(predictions), &examples(gold), k).map_err(err)?;
    to_py(py, &m)
}

#[pyfunction]
fn sweep_top_k(
    py: Python<'_>,
    predictions: Vec<PyPrediction>,
    gold: Vec<PyExample>,
    ks: Vec<usize>,
) -> PyResult<Py<PyAny>> {
    let rows =
        evaluate::sweep_top_k(&unwrap_all(predictions), &examples(gold), &ks).map_err(err)?;
    to_py(py, &rows)
}

#[pyfunction]
fn welch_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    evaluate::welch_ttest(&a, &b).map_err(err)
}

#[pyfunction]
fn js_divergence(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    evaluate::js_divergence(&a, &b).map_err(err)
}

/// Fleiss' kappa over an items x raters table of category indices; None when undefined.
#[pyfunction]
fn fleiss_kappa(ratings: Vec<Vec<usize>>) -> PyResult<Option<f64>> {
    evaluate::fleiss_kappa(&ratings).map_err(err)
}

#[pyfunction]
fn krippendorff_alpha(ratings: Vec<Vec<usize>>) -> PyResult<Option<f64>> {
    evaluate::krippendorff_alpha(&ratings).map_err(err)
}

/// Mean attention ratios over graphs given as (matrix, evidence mask) pairs.
#[pyfunction]
fn attention_ratios(
    py: Python<'_>,
    graphs: Vec<(Vec<Vec<f64>>, Vec<bool>)>,
) -> PyResult<Py<PyAny>> {
    let graphs: Vec<evaluate::GraphAttention> = graphs
        .into_iter()
        .map(|(attention, evidence)| evaluate::GraphAttention {
            attention,
            evidence,
        })
        .collect();
    to_py(py, &evaluate::attention_ratios(&graphs).map_err(err)?)
}

#[pymodule]
fn hopcheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_SEED", hopcheck::DEFAULT_SEED)?;
    m.add("DEFAULT_TOP_K", DEFAULT_TOP_K)?;
    m.add_class::<PyExample>()?;
    m.add_class::<PyPrediction>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTfidfNb>()?;
    m.add_function(wrap_pyfunction!(load_examples, m)?)?;
    m.add_function(wrap_pyfunction!(validate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(compute_stats, m)?)?;
    m.add_function(wrap_pyfunction!(apply_setting, m)?)?;
    m.add_function(wrap_pyfunction!(ne_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(select_evidence, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_label, m)?)?;
    m.add_function(wrap_pyfunction!(random_predict, m)?)?;
    m.add_function(wrap_pyfunction!(train_from_config, m)?)?;
    m.add_function(wrap_pyfunction!(label_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(evidence_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(fever_score, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_report, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_top_k, m)?)?;
    m.add_function(wrap_pyfunction!(welch_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(js_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(fleiss_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(krippendorff_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(attention_ratios, m)?)?;
    Ok(())
}
