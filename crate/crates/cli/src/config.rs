//! Problem configuration files.
//!
//! A config is a JSON object. Only `stack`, `band`, `weights` and
//! `initial_thicknesses_nm` are required; everything else has a default and is
//! written back, fully resolved, into every report. Parsing collects all
//! unknown keys, missing keys and invalid values before failing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use filmforge_core::agent::{DqnSettings, ExplorationSchedule, DEFAULT_REPLAY_CAPACITY};
use filmforge_core::environment::{
    DEFAULT_MAX_STEPS_PER_EPISODE, DEFAULT_MAX_THICKNESS_NM, DEFAULT_MIN_THICKNESS_NM, DEFAULT_NORMALIZATION_NM,
    DEFAULT_NO_IMPROVE_WINDOW,
};
use filmforge_core::{
    AimWeights, EnvConfig, Error, GaConfig, Layer, MaterialLibrary, MaterialTable, OptimizerKind, Result, SpectralGrid,
    StackTemplate, TrainHyperparams,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Overrides the bundled material directory.
pub const MATERIALS_DIR_ENV: &str = "FILMFORGE_MATERIALS_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackingSpec {
    pub material: String,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub incident: String,
    /// Free layers, incident side first.
    pub layers: Vec<String>,
    pub backing: Vec<BackingSpec>,
    pub substrate: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub min_nm: f64,
    pub max_nm: f64,
    pub points: usize,
}

impl BandSpec {
    /// `points: 1` with equal bounds selects a single wavelength.
    pub fn grid(&self) -> Result<SpectralGrid> {
        if self.points == 1 && self.min_nm == self.max_nm {
            return SpectralGrid::single(self.min_nm);
        }
        SpectralGrid::new(self.min_nm, self.max_nm, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsSpec {
    pub t: f64,
    pub r: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub precision_level: u32,
    pub no_improve_window: u32,
    /// `null` disables the threshold.
    pub aim_threshold: Option<f64>,
    pub max_steps_per_episode: u64,
    pub min_thickness_nm: Vec<f64>,
    pub max_thickness_nm: Vec<f64>,
    pub normalization_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnSpec {
    pub episodes: u64,
    pub gamma: f64,
    pub lr0: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_steps: u64,
    pub target_sync_interval: Option<u64>,
    pub max_evaluations: Option<u64>,
}

impl Default for DqnSpec {
    fn default() -> Self {
        let h = TrainHyperparams::default();
        let s = ExplorationSchedule::default();
        Self {
            episodes: 100,
            gamma: h.gamma,
            lr0: h.lr0,
            lr_decay: h.lr_decay,
            batch_size: h.batch_size,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            warmup: h.batch_size,
            eps_start: s.eps_start,
            eps_end: s.eps_end,
            decay_steps: s.decay_steps,
            target_sync_interval: None,
            max_evaluations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaSpec {
    pub population_size: usize,
    pub generations: u64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_sigma_nm: f64,
    pub elitism_count: usize,
}

impl Default for GaSpec {
    fn default() -> Self {
        let g = GaConfig::new(1);
        Self {
            population_size: g.population_size,
            generations: g.generations,
            crossover_rate: g.crossover_rate,
            mutation_rate: g.mutation_rate,
            mutation_sigma_nm: g.mutation_sigma_nm,
            elitism_count: g.elitism_count,
        }
    }
}

/// A fully defaulted problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Extra material files, name to path. Relative paths are resolved against
    /// the directory of the config file.
    pub materials: BTreeMap<String, String>,
    pub stack: StackSpec,
    pub band: BandSpec,
    pub weights: WeightsSpec,
    pub initial_thicknesses_nm: Vec<f64>,
    pub environment: EnvironmentSpec,
    pub optimizer: OptimizerKind,
    pub dqn: DqnSpec,
    pub ga: GaSpec,
    pub seed: u64,
    pub output_dir: String,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

const TOP_KEYS: &[&str] = &[
    "materials",
    "stack",
    "band",
    "weights",
    "initial_thicknesses_nm",
    "environment",
    "optimizer",
    "dqn",
    "ga",
    "seed",
    "output_dir",
];
const STACK_KEYS: &[&str] = &["incident", "layers", "backing", "substrate"];
const BACKING_KEYS: &[&str] = &["material", "thickness_nm"];
const BAND_KEYS: &[&str] = &["min_nm", "max_nm", "points"];
const WEIGHT_KEYS: &[&str] = &["t", "r", "a"];
const ENV_KEYS: &[&str] = &[
    "precision_level",
    "no_improve_window",
    "aim_threshold",
    "max_steps_per_episode",
    "min_thickness_nm",
    "max_thickness_nm",
    "normalization_nm",
];
const DQN_KEYS: &[&str] = &[
    "episodes",
    "gamma",
    "lr0",
    "lr_decay",
    "batch_size",
    "replay_capacity",
    "warmup",
    "eps_start",
    "eps_end",
    "decay_steps",
    "target_sync_interval",
    "max_evaluations",
];
const GA_KEYS: &[&str] = &[
    "population_size",
    "generations",
    "crossover_rate",
    "mutation_rate",
    "mutation_sigma_nm",
    "elitism_count",
];

/// Problems found while reading the document.
#[derive(Default)]
struct Diagnostics {
    unknown: Vec<String>,
    missing: Vec<String>,
    invalid: Vec<String>,
}

impl Diagnostics {
    fn into_result(self) -> Result<()> {
        let mut parts = Vec::new();
        if !self.unknown.is_empty() {
            parts.push(format!("unknown key(s): {}", self.unknown.join(", ")));
        }
        if !self.missing.is_empty() {
            parts.push(format!("missing required key(s): {}", self.missing.join(", ")));
        }
        parts.extend(self.invalid);
        if parts.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(parts.join("; ")))
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Typed, path-aware access to one JSON object.
struct Section<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
}

impl<'a> Section<'a> {
    fn open(value: Option<&'a Value>, path: String, allowed: &[&str], d: &mut Diagnostics) -> Self {
        let map = match value {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        d.unknown.push(join(&path, k));
                    }
                }
                Some(m)
            }
            Some(_) => {
                d.invalid.push(format!("{path} must be an object"));
                None
            }
        };
        Self { path, map }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.map.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn child(&self, key: &str, allowed: &[&str], d: &mut Diagnostics) -> Section<'a> {
        Section::open(self.raw(key), join(&self.path, key), allowed, d)
    }

    fn get<T>(&self, key: &str, required: bool, d: &mut Diagnostics, conv: impl Fn(&Value) -> Option<T>, kind: &str) -> Option<T> {
        let full = join(&self.path, key);
        match self.raw(key) {
            None => {
                if required {
                    d.missing.push(full);
                }
                None
            }
            Some(v) => {
                let out = conv(v);
                if out.is_none() {
                    d.invalid.push(format!("{full} must be {kind}"));
                }
                out
            }
        }
    }

    fn f64(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<f64> {
        self.get(key, required, d, Value::as_f64, "a number")
    }

    fn u64(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<u64> {
        self.get(key, required, d, Value::as_u64, "a non-negative integer")
    }

    fn usize(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<usize> {
        self.u64(key, required, d).and_then(|v| usize::try_from(v).ok())
    }

    fn u32(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<u32> {
        self.get(key, required, d, |v| v.as_u64().and_then(|x| u32::try_from(x).ok()), "a non-negative integer")
    }

    fn string(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<String> {
        self.get(key, required, d, |v| v.as_str().map(str::to_string), "a string")
    }

    fn f64_list(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<Vec<f64>> {
        self.get(key, required, d, |v| v.as_array()?.iter().map(Value::as_f64).collect(), "a list of numbers")
    }

    fn string_list(&self, key: &str, required: bool, d: &mut Diagnostics) -> Option<Vec<String>> {
        self.get(
            key,
            required,
            d,
            |v| v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect(),
            "a list of strings",
        )
    }

    /// A number applied to every layer, or one number per layer.
    fn per_layer(&self, key: &str, layers: usize, default: f64, d: &mut Diagnostics) -> Vec<f64> {
        match self.raw(key) {
            None => vec![default; layers],
            Some(Value::Number(n)) => vec![n.as_f64().unwrap_or(default); layers],
            Some(_) => self.f64_list(key, false, d).unwrap_or_else(|| vec![default; layers]),
        }
    }
}

impl ProblemConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parses a config document; `base_dir` anchors relative material paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: "config".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut d = Diagnostics::default();
        if !value.is_object() {
            return Err(Error::Validation("config must be a JSON object".into()));
        }
        let top = Section::open(Some(&value), String::new(), TOP_KEYS, &mut d);

        let mut materials = BTreeMap::new();
        match top.raw("materials") {
            None => {}
            Some(Value::Object(m)) => {
                for (name, p) in m {
                    match p.as_str() {
                        Some(p) => {
                            materials.insert(name.clone(), p.to_string());
                        }
                        None => d.invalid.push(format!("materials.{name} must be a file path")),
                    }
                }
            }
            Some(_) => d.invalid.push("materials must be an object of name to path".into()),
        }

        if top.raw("stack").is_none() {
            d.missing.push("stack".into());
        }
        let stack_s = top.child("stack", STACK_KEYS, &mut d);
        let layers = stack_s.string_list("layers", top.raw("stack").is_some(), &mut d).unwrap_or_default();
        let mut backing = Vec::new();
        match stack_s.raw("backing") {
            None => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let s = Section::open(Some(item), format!("stack.backing[{i}]"), BACKING_KEYS, &mut d);
                    let material = s.string("material", true, &mut d);
                    let thickness = s.f64("thickness_nm", true, &mut d);
                    if let (Some(material), Some(thickness_nm)) = (material, thickness) {
                        backing.push(BackingSpec { material, thickness_nm });
                    }
                }
            }
            Some(_) => d.invalid.push("stack.backing must be a list".into()),
        }
        let stack = StackSpec {
            incident: stack_s.string("incident", false, &mut d).unwrap_or_else(|| "air".into()),
            layers,
            backing,
            substrate: stack_s
                .string("substrate", top.raw("stack").is_some(), &mut d)
                .unwrap_or_default(),
        };
        let n_layers = stack.layers.len();

        let band_present = top.raw("band").is_some();
        if !band_present {
            d.missing.push("band".into());
        }
        let band_s = top.child("band", BAND_KEYS, &mut d);
        let band = BandSpec {
            min_nm: band_s.f64("min_nm", band_present, &mut d).unwrap_or(f64::NAN),
            max_nm: band_s.f64("max_nm", band_present, &mut d).unwrap_or(f64::NAN),
            points: band_s.usize("points", band_present, &mut d).unwrap_or(0),
        };

        let weights_present = top.raw("weights").is_some();
        if !weights_present {
            d.missing.push("weights".into());
        }
        let w_s = top.child("weights", WEIGHT_KEYS, &mut d);
        let weights = WeightsSpec {
            t: w_s.f64("t", weights_present, &mut d).unwrap_or(0.0),
            r: w_s.f64("r", weights_present, &mut d).unwrap_or(0.0),
            a: w_s.f64("a", weights_present, &mut d).unwrap_or(0.0),
        };

        let initial_thicknesses_nm = top.f64_list("initial_thicknesses_nm", true, &mut d).unwrap_or_default();

        let e_s = top.child("environment", ENV_KEYS, &mut d);
        let environment = EnvironmentSpec {
            precision_level: e_s.u32("precision_level", false, &mut d).unwrap_or(1),
            no_improve_window: e_s.u32("no_improve_window", false, &mut d).unwrap_or(DEFAULT_NO_IMPROVE_WINDOW),
            aim_threshold: e_s.f64("aim_threshold", false, &mut d),
            max_steps_per_episode: e_s
                .u64("max_steps_per_episode", false, &mut d)
                .unwrap_or(DEFAULT_MAX_STEPS_PER_EPISODE),
            min_thickness_nm: e_s.per_layer("min_thickness_nm", n_layers, DEFAULT_MIN_THICKNESS_NM, &mut d),
            max_thickness_nm: e_s.per_layer("max_thickness_nm", n_layers, DEFAULT_MAX_THICKNESS_NM, &mut d),
            normalization_nm: e_s.f64("normalization_nm", false, &mut d).unwrap_or(DEFAULT_NORMALIZATION_NM),
        };

        let optimizer = match top.string("optimizer", false, &mut d).as_deref() {
            None | Some("dqn") => OptimizerKind::Dqn,
            Some("ga") => OptimizerKind::Ga,
            Some(other) => {
                d.invalid.push(format!("optimizer must be \"dqn\" or \"ga\", got \"{other}\""));
                OptimizerKind::Dqn
            }
        };

        let q_s = top.child("dqn", DQN_KEYS, &mut d);
        let dd = DqnSpec::default();
        let batch_size = q_s.usize("batch_size", false, &mut d).unwrap_or(dd.batch_size);
        let dqn = DqnSpec {
            episodes: q_s.u64("episodes", false, &mut d).unwrap_or(dd.episodes),
            gamma: q_s.f64("gamma", false, &mut d).unwrap_or(dd.gamma),
            lr0: q_s.f64("lr0", false, &mut d).unwrap_or(dd.lr0),
            lr_decay: q_s.f64("lr_decay", false, &mut d).unwrap_or(dd.lr_decay),
            batch_size,
            replay_capacity: q_s.usize("replay_capacity", false, &mut d).unwrap_or(dd.replay_capacity),
            warmup: q_s.usize("warmup", false, &mut d).unwrap_or(batch_size),
            eps_start: q_s.f64("eps_start", false, &mut d).unwrap_or(dd.eps_start),
            eps_end: q_s.f64("eps_end", false, &mut d).unwrap_or(dd.eps_end),
            decay_steps: q_s.u64("decay_steps", false, &mut d).unwrap_or(dd.decay_steps),
            target_sync_interval: q_s.u64("target_sync_interval", false, &mut d),
            max_evaluations: q_s.u64("max_evaluations", false, &mut d),
        };

        let g_s = top.child("ga", GA_KEYS, &mut d);
        let gd = GaSpec::default();
        let ga = GaSpec {
            population_size: g_s.usize("population_size", false, &mut d).unwrap_or(gd.population_size),
            generations: g_s.u64("generations", false, &mut d).unwrap_or(gd.generations),
            crossover_rate: g_s.f64("crossover_rate", false, &mut d).unwrap_or(gd.crossover_rate),
            mutation_rate: g_s.f64("mutation_rate", false, &mut d).unwrap_or(gd.mutation_rate),
            mutation_sigma_nm: g_s.f64("mutation_sigma_nm", false, &mut d).unwrap_or(gd.mutation_sigma_nm),
            elitism_count: g_s.usize("elitism_count", false, &mut d).unwrap_or(gd.elitism_count),
        };

        let config = ProblemConfig {
            materials,
            stack,
            band,
            weights,
            initial_thicknesses_nm,
            environment,
            optimizer,
            dqn,
            ga,
            seed: top.u64("seed", false, &mut d).unwrap_or(0),
            output_dir: top.string("output_dir", false, &mut d).unwrap_or_else(|| "out".into()),
            base_dir: base_dir.to_path_buf(),
        };
        d.into_result()?;
        config.check()?;
        Ok(config)
    }

    /// Module-level invariants, all reported together.
    fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.stack.layers.is_empty() {
            problems.push("stack.layers must name at least one material".to_string());
        }
        if let Err(e) = self.band.grid() {
            problems.push(format!("band: {}", strip(&e)));
        }
        for b in &self.stack.backing {
            if !(b.thickness_nm.is_finite() && b.thickness_nm >= 0.0) {
                problems.push(format!("backing layer {}: thickness must be >= 0", b.material));
            }
        }
        let template = placeholder_template(self.stack.layers.len());
        match SpectralGrid::new(1.0, 2.0, 2) {
            Ok(grid) => {
                if let Err(e) = self.env_config_with(template, grid).validate() {
                    problems.push(strip(&e));
                }
            }
            Err(e) => problems.push(strip(&e)),
        }
        if let Err(e) = self.dqn_settings(self.seed, None).validate() {
            problems.push(strip(&e));
        }
        if let Err(e) = self.ga_config(self.seed).validate() {
            problems.push(strip(&e));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    fn aim_weights(&self) -> AimWeights {
        AimWeights {
            t: self.weights.t,
            r: self.weights.r,
            a: self.weights.a,
        }
    }

    fn env_config_with(&self, template: StackTemplate, grid: SpectralGrid) -> EnvConfig {
        let e = &self.environment;
        let mut c = EnvConfig::new(template, grid, self.aim_weights(), self.initial_thicknesses_nm.clone());
        c.precision_level = e.precision_level;
        c.no_improve_window = e.no_improve_window;
        c.aim_threshold = e.aim_threshold.unwrap_or(f64::NEG_INFINITY);
        c.max_steps_per_episode = e.max_steps_per_episode;
        c.min_thickness_nm = e.min_thickness_nm.clone();
        c.max_thickness_nm = e.max_thickness_nm.clone();
        c.normalization_nm = e.normalization_nm;
        c
    }

    /// DQN settings for `seed`, optionally overriding the episode count.
    pub fn dqn_settings(&self, seed: u64, episodes: Option<u64>) -> DqnSettings {
        let q = &self.dqn;
        DqnSettings {
            hyper: TrainHyperparams {
                gamma: q.gamma,
                lr0: q.lr0,
                lr_decay: q.lr_decay,
                batch_size: q.batch_size,
                seed,
            },
            schedule: ExplorationSchedule {
                eps_start: q.eps_start,
                eps_end: q.eps_end,
                decay_steps: q.decay_steps,
            },
            episodes: episodes.unwrap_or(q.episodes),
            replay_capacity: q.replay_capacity,
            warmup: q.warmup,
            target_sync_interval: q.target_sync_interval,
            max_evaluations: q.max_evaluations,
            record_trace: false,
        }
    }

    pub fn ga_config(&self, seed: u64) -> GaConfig {
        let g = &self.ga;
        GaConfig {
            population_size: g.population_size,
            generations: g.generations,
            crossover_rate: g.crossover_rate,
            mutation_rate: g.mutation_rate,
            mutation_sigma_nm: g.mutation_sigma_nm,
            elitism_count: g.elitism_count,
            min_thickness_nm: self.environment.min_thickness_nm.clone(),
            max_thickness_nm: self.environment.max_thickness_nm.clone(),
            seed,
            max_evaluations: None,
        }
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Loads materials and builds the optical problem.
    pub fn resolve(&self) -> Result<Problem> {
        let mut library = match std::env::var_os(MATERIALS_DIR_ENV) {
            Some(dir) => MaterialLibrary::from_dir(Path::new(&dir))?,
            None => MaterialLibrary::bundled(),
        };
        for (name, p) in &self.materials {
            let path = self.base_dir.join(p);
            library.load_file(name, &path)?;
        }
        let mut missing = Vec::new();
        let mut get = |name: &str| -> Option<Arc<MaterialTable>> {
            match library.get(name) {
                Ok(t) => Some(t),
                Err(_) => {
                    missing.push(name.to_string());
                    None
                }
            }
        };
        let incident = get(&self.stack.incident);
        let free: Vec<_> = self.stack.layers.iter().map(|n| get(n)).collect();
        let backing: Vec<_> = self
            .stack
            .backing
            .iter()
            .map(|b| get(&b.material).map(|m| Layer::new(m, b.thickness_nm)))
            .collect();
        let substrate = get(&self.stack.substrate);
        if !missing.is_empty() {
            missing.dedup();
            return Err(Error::Validation(format!(
                "unknown material(s): {} (available: {})",
                missing.join(", "),
                library.names().collect::<Vec<_>>().join(", ")
            )));
        }
        let template = StackTemplate {
            incident: incident.expect("checked"),
            free: free.into_iter().map(|m| m.expect("checked")).collect(),
            backing: backing.into_iter().map(|b| b.expect("checked")).collect(),
            substrate: substrate.expect("checked"),
        };
        let grid = self.band.grid()?;
        let env = self.env_config_with(template, grid);
        // materials must cover the band
        filmforge_core::StackEvaluator::new(&env.template, grid)?;
        Ok(Problem {
            config: self.clone(),
            env,
        })
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Air-only template used to run the environment invariants before materials
/// are loaded.
fn placeholder_template(layers: usize) -> StackTemplate {
    let air = Arc::new(MaterialTable::air());
    StackTemplate {
        incident: air.clone(),
        free: vec![air.clone(); layers],
        backing: Vec::new(),
        substrate: air,
    }
}

/// A config with its materials resolved.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub env: EnvConfig,
}

impl Problem {
    pub fn template(&self) -> &StackTemplate {
        &self.env.template
    }

    pub fn grid(&self) -> SpectralGrid {
        self.env.grid
    }

    pub fn weights(&self) -> AimWeights {
        self.env.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "stack": {"layers": ["MgF2"], "substrate": "glass"},
        "band": {"min_nm": 400, "max_nm": 700, "points": 31},
        "weights": {"t": 1, "r": -1, "a": 0},
        "initial_thicknesses_nm": [100]
    }"#;

    #[test]
    fn defaults_are_filled() {
        let c = ProblemConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.stack.incident, "air");
        assert_eq!(c.environment.max_thickness_nm, vec![500.0]);
        assert_eq!(c.dqn.batch_size, 32);
        assert_eq!(c.ga.population_size, 50);
        assert_eq!(c.optimizer, OptimizerKind::Dqn);
    }

    #[test]
    fn echo_round_trips() {
        let c = ProblemConfig::parse(MINIMAL, Path::new(".")).unwrap();
        let again = ProblemConfig::parse(&c.to_json(), Path::new(".")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace("\"points\": 31", "\"points\": 31, \"step\": 2").replace(
            "\"initial_thicknesses_nm\"",
            "\"colour\": 1, \"initial_thicknesses_nm\"",
        );
        let err = ProblemConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("band.step"), "{err}");
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn missing_keys_are_listed_together() {
        let err = ProblemConfig::parse(r#"{"stack": {"layers": ["MgF2"], "substrate": "glass"}}"#, Path::new("."))
            .unwrap_err();
        assert!(err.is_validation());
        let msg = err.to_string();
        for key in ["band", "weights", "initial_thicknesses_nm"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn invariant_violations_are_aggregated() {
        let text = MINIMAL
            .replace("\"initial_thicknesses_nm\": [100]", "\"initial_thicknesses_nm\": [900], \"ga\": {\"elitism_count\": 60}")
            .replace("\"min_nm\": 400", "\"min_nm\": 800");
        let msg = ProblemConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("band"), "{msg}");
        assert!(msg.contains("initial thickness"), "{msg}");
        assert!(msg.contains("elitism_count"), "{msg}");
    }

    #[test]
    fn unknown_material_is_a_validation_error() {
        let text = MINIMAL.replace("MgF2", "Unobtainium");
        let err = ProblemConfig::parse(&text, Path::new(".")).unwrap().resolve().unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("Unobtainium"));
    }
}
