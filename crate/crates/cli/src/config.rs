//! Experiment configuration files.
//!
//! A config file holds one JSON object or an array of them. Every object is
//! validated and resolved into a [`Job`] before anything is computed.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinbound::basis::{BasisParams, BasisVariant, MonomialBasis};
use spinbound::exact::EdMode;
use spinbound::model::three_qubit_model;
use spinbound::{
    Lattice, ModelSpec, Observable, PauliPolynomial, PauliString, Shift, SolveOptions,
    SymmetryOptions, TermKind,
};

use crate::CliError;

/// Above this many sites no exact reference values are computed.
pub const EXACT_REFERENCE_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Energy,
    Observable,
    Anderson,
    Exact,
    Export,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Energy => "energy",
            Task::Observable => "observable",
            Task::Anderson => "anderson",
            Task::Exact => "exact",
            Task::Export => "export",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Chain {
        n: usize,
        #[serde(default)]
        j2: f64,
    },
    Square {
        l: usize,
        #[serde(default)]
        j2: f64,
    },
    /// Three open sites with two unit-strength bonds.
    ThreeQubit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    Standard,
    Frustrated,
    Square,
    SquareNoDeg4,
    /// Every string of degree at most `degree_cap` (small systems only).
    Full,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub r: Option<usize>,
    pub degree_cap: Option<usize>,
    pub variant: Option<VariantConfig>,
    #[serde(default)]
    pub rdm_k: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    pub sign: Option<bool>,
    pub translation: Option<bool>,
    pub permutation: Option<bool>,
    pub mirror: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `(1/4) sigma^x_0 sigma^x_{0 + (rows, cols)}`.
    Correlation {
        rows: usize,
        #[serde(default)]
        cols: usize,
    },
    /// First- or second-neighbour energy per bond.
    Term { which: TermKind },
    /// Arbitrary Hermitian polynomial given as `[coefficient, "X1 Y2"]` pairs.
    /// Coefficients are reals or `[re, im]` pairs.
    Custom {
        label: String,
        terms: Vec<(serde_json::Value, String)>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSource {
    /// Exact ground energy widened by `window_margin` on both sides.
    Exact,
    /// Relaxation lower bound and exact (or product-state) upper bound.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowConfig {
    Explicit { lower: f64, upper: f64 },
    Source(WindowSource),
}

/// One experiment as written in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Must match the subcommand when present.
    #[serde(default)]
    pub task: Option<Task>,
    pub model: ModelConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub symmetry: SymmetryConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub window_margin: Option<f64>,
    #[serde(default)]
    pub anderson_k: Vec<usize>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub ed_mode: Option<String>,
    #[serde(default)]
    pub export_file: Option<String>,
}

/// A validated experiment with everything needed to run it.
#[derive(Clone, Debug)]
pub struct Job {
    pub index: usize,
    pub task: Task,
    pub config: ExperimentConfig,
    pub hash: String,
    pub seed: u64,
    pub model_label: &'static str,
    pub lattice: Lattice,
    pub spec: Option<ModelSpec>,
    pub j2: f64,
    pub hamiltonian: PauliPolynomial,
    pub basis: Option<MonomialBasis>,
    pub symmetry: SymmetryOptions,
    pub rdm_k: Vec<usize>,
    pub observables: Vec<Observable>,
    pub window: WindowConfig,
    pub window_margin: f64,
    pub restarts: usize,
    pub ed_mode: EdMode,
}

impl Job {
    pub fn sites(&self) -> usize {
        self.lattice.num_sites()
    }

    /// File stem for per-run artifacts.
    pub fn stem(&self) -> String {
        let tag = match &self.config.name {
            Some(n) => n.clone(),
            None => self.hash[..12].to_string(),
        };
        format!("{:03}-{}-{}", self.index, self.task.name(), tag)
    }

    pub fn basis_label(&self) -> String {
        self.basis
            .as_ref()
            .map(|b| b.label().to_string())
            .unwrap_or_default()
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads a config file holding one object or an array of objects.
pub fn read_configs(path: &Path) -> Result<Vec<ExperimentConfig>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_configs(&text)
}

pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid(format!("malformed JSON: {e}")))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    if items.is_empty() {
        return Err(invalid("config array is empty"));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v).map_err(|e| invalid(format!("config entry {i}: {e}")))
        })
        .collect()
}

/// Stable hex digest of the normalized config, the task and the seed.
pub fn config_hash(config: &ExperimentConfig, task: Task, seed: u64) -> String {
    let body = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(task.name().as_bytes());
    h.update([0]);
    h.update(body.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

fn parse_ed_mode(text: Option<&str>) -> Result<EdMode, CliError> {
    match text.unwrap_or("auto") {
        "auto" => Ok(EdMode::Auto),
        "dense" => Ok(EdMode::Dense),
        "lanczos" => Ok(EdMode::Lanczos),
        other => Err(invalid(format!("unknown ed_mode {other:?}"))),
    }
}

fn build_observable(
    cfg: &ObservableConfig,
    spec: Option<&ModelSpec>,
    lattice: &Lattice,
) -> Result<Observable, CliError> {
    let need_spec = || spec.ok_or_else(|| invalid("this observable needs a chain or square model"));
    let obs = match cfg {
        ObservableConfig::Correlation { rows, cols } => {
            let spec = need_spec()?;
            let extent = lattice.extent();
            if *rows >= extent || *cols >= extent {
                return Err(invalid(format!(
                    "displacement ({rows},{cols}) exceeds the lattice extent {extent}"
                )));
            }
            if *cols != 0 && lattice.kind() == spinbound::LatticeKind::Chain {
                return Err(invalid("chain correlations take a single displacement"));
            }
            spec.correlation_observable(Shift { rows: *rows, cols: *cols })?
        }
        ObservableConfig::Term { which } => {
            let spec = need_spec()?;
            if *which == TermKind::J2 && spec.j2 == 0.0 {
                return Err(invalid("the J2 term observable needs a nonzero j2"));
            }
            spec.hamiltonian_term_observable(*which)?
        }
        ObservableConfig::Custom { label, terms } => {
            if terms.is_empty() {
                return Err(invalid(format!("custom observable {label:?} has no terms")));
            }
            let mut poly = PauliPolynomial::new();
            for (coef, text) in terms {
                let c = parse_coefficient(coef).map_err(invalid)?;
                let s = PauliString::parse(text, Some(lattice))?;
                if s.support_mask() >> lattice.num_sites() != 0 {
                    return Err(invalid(format!("{text:?} acts outside the lattice")));
                }
                poly.add_term(c, s);
            }
            Observable::new(label.clone(), poly)?
        }
    };
    Ok(obs)
}

/// A real number or a `[re, im]` pair.
fn parse_coefficient(v: &serde_json::Value) -> Result<Complex64, String> {
    if let Some(x) = v.as_f64() {
        return Ok(Complex64::new(x, 0.0));
    }
    if let Some([re, im]) = v.as_array().map(|a| a.as_slice()) {
        if let (Some(re), Some(im)) = (re.as_f64(), im.as_f64()) {
            return Ok(Complex64::new(re, im));
        }
    }
    Err(format!("bad coefficient {v}"))
}

/// Resolves and checks a config for `task`; nothing expensive happens here.
pub fn resolve(
    index: usize,
    config: ExperimentConfig,
    task: Task,
    seed: u64,
) -> Result<Job, CliError> {
    if let Some(t) = config.task {
        if t != task {
            return Err(invalid(format!(
                "config entry {index} is for task {} but the subcommand is {}",
                t.name(),
                task.name()
            )));
        }
    }
    let (model_label, lattice, spec, j2, hamiltonian) = match config.model {
        ModelConfig::Chain { n, j2 } => {
            let lattice = Lattice::chain(n)?;
            let spec = ModelSpec::new(lattice, j2)?;
            ("chain", lattice, Some(spec), j2, spec.build_hamiltonian())
        }
        ModelConfig::Square { l, j2 } => {
            let lattice = Lattice::square(l)?;
            let spec = ModelSpec::new(lattice, j2)?;
            ("square", lattice, Some(spec), j2, spec.build_hamiltonian())
        }
        ModelConfig::ThreeQubit => {
            let (lattice, h) = three_qubit_model();
            ("three_qubit", lattice, None, 0.0, h)
        }
    };
    let periodic = spec.is_some();
    let sym = config.symmetry;
    let symmetry = SymmetryOptions {
        sign: sym.sign.unwrap_or(true),
        translation: sym.translation.unwrap_or(periodic),
        permutation: sym.permutation.unwrap_or(true),
        mirror: sym.mirror.unwrap_or(periodic),
    };

    let needs_basis = matches!(task, Task::Energy | Task::Observable | Task::Export);
    let basis = if needs_basis {
        let b = &config.basis;
        let default_variant = match config.model {
            ModelConfig::Chain { .. } => VariantConfig::Standard,
            ModelConfig::Square { .. } => VariantConfig::Square,
            ModelConfig::ThreeQubit => VariantConfig::Full,
        };
        let variant = b.variant.unwrap_or(default_variant);
        let basis = match variant {
            VariantConfig::Full => {
                let d = b.degree_cap.unwrap_or(2);
                MonomialBasis::full(&lattice, d)?
            }
            other => {
                let variant = match other {
                    VariantConfig::Standard => BasisVariant::Standard,
                    VariantConfig::Frustrated => BasisVariant::Frustrated,
                    VariantConfig::Square => BasisVariant::Square,
                    VariantConfig::SquareNoDeg4 => BasisVariant::SquareNoDeg4,
                    VariantConfig::Full => unreachable!(),
                };
                if spec.is_none() {
                    return Err(invalid("the three-qubit model only supports the full basis"));
                }
                let r = b.r.unwrap_or(match lattice.kind() {
                    spinbound::LatticeKind::Chain => lattice.num_sites() / 2,
                    spinbound::LatticeKind::Square => 3,
                });
                let params = BasisParams {
                    r,
                    degree_cap: b.degree_cap.unwrap_or(4),
                    variant,
                };
                MonomialBasis::for_lattice(&lattice, params)?
            }
        };
        Some(basis)
    } else {
        None
    };
    for &k in &config.basis.rdm_k {
        if k == 0 || k > lattice.num_sites().min(10) {
            return Err(invalid(format!("rdm_k entry {k} out of range")));
        }
    }

    let observables = config
        .observables
        .iter()
        .map(|o| build_observable(o, spec.as_ref(), &lattice))
        .collect::<Result<Vec<_>, _>>()?;
    if task == Task::Observable && observables.is_empty() {
        return Err(invalid("the observable task needs at least one observable"));
    }
    let window = config.window.unwrap_or(WindowConfig::Source(WindowSource::Auto));
    match window {
        WindowConfig::Explicit { lower, upper } => {
            if !(lower.is_finite() && upper.is_finite()) || lower > upper {
                return Err(invalid(format!("energy window [{lower}, {upper}] is inverted or not finite")));
            }
        }
        WindowConfig::Source(WindowSource::Exact) if lattice.num_sites() > EXACT_REFERENCE_LIMIT => {
            return Err(invalid(format!(
                "exact windows need at most {EXACT_REFERENCE_LIMIT} sites"
            )));
        }
        WindowConfig::Source(_) => {}
    }
    let window_margin = config.window_margin.unwrap_or(1e-9);
    if !(window_margin >= 0.0 && window_margin.is_finite()) {
        return Err(invalid("window_margin must be a nonnegative number"));
    }
    if task == Task::Anderson && config.anderson_k.is_empty() {
        return Err(invalid("the anderson task needs a non-empty anderson_k list"));
    }
    if task == Task::Exact && lattice.num_sites() > 24 {
        return Err(invalid("exact diagonalization is limited to 24 sites"));
    }
    let ed_mode = parse_ed_mode(config.ed_mode.as_deref())?;
    let s = &config.solver;
    if !(s.relaxation > 0.0 && s.relaxation < 2.0) || s.penalty <= 0.0 || s.max_iter == 0 {
        return Err(invalid("solver relaxation must be in (0, 2), penalty positive and max_iter nonzero"));
    }
    if let Some(f) = &config.export_file {
        if f.is_empty() || Path::new(f).components().count() != 1 {
            return Err(invalid("export_file must be a plain file name"));
        }
    }

    let hash = config_hash(&config, task, seed);
    Ok(Job {
        index,
        task,
        hash,
        seed,
        model_label,
        lattice,
        spec,
        j2,
        hamiltonian,
        basis,
        symmetry,
        rdm_k: config.basis.rdm_k.clone(),
        observables,
        window,
        window_margin,
        restarts: config.restarts.unwrap_or(16),
        ed_mode,
        config,
    })
}
