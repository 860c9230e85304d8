use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Flat, fully serializable record of one invocation. Every field mirrors
/// a command-line flag; a persisted config re-run through `run --config`
/// reproduces the original outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require_sat: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_step: Option<u32>,
}

impl ExperimentConfig {
    pub fn new(command: &str) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            model: None,
            n: None,
            m: None,
            alpha: None,
            seed: None,
            delta: None,
            grid: None,
            jobs: None,
            out: None,
            preset: None,
            require_sat: None,
            count: None,
            t_total: None,
            log_points: None,
            target_p: None,
            t_cap: None,
            epsilon: None,
            n_min: None,
            n_max: None,
            n_step: None,
        }
    }

    /// The experiment identity: every field that affects result bytes.
    /// `out` and `jobs` only steer where files land and how many threads
    /// run, and `preset` is a macro already expanded by [`resolve`], so
    /// all three are stripped. Running one config into two directories
    /// therefore yields identical artifacts with identical hashes.
    pub fn identity(&self) -> ExperimentConfig {
        let mut id = self.clone();
        id.out = None;
        id.jobs = None;
        id.preset = None;
        id
    }

    /// Hex SHA-256 of the canonical JSON form of [`identity`](Self::identity);
    /// stamped into every output file so artifacts trace back to their
    /// parameters.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.identity()).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    pub fn out_dir(&self) -> &str {
        self.out.as_deref().unwrap_or("qanneal-out")
    }
}

/// A request the toolkit cannot act on (bad flag combination, unknown
/// name, empty grid). Distinct from module errors: reported as plain
/// text and exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

const MODELS: [&str; 3] = ["sat3", "three-spin", "grover"];

/// Commands whose physics depends on a density of states.
const DOS_COMMANDS: [&str; 7] =
    ["dos", "gap-scan", "min-gap", "schedule", "bounds", "evolve", "tstar"];

/// Named parameter bundles. Each expands onto fields the user left unset,
/// so explicit flags win over the preset.
pub fn apply_preset(cfg: &mut ExperimentConfig) -> Result<(), UsageError> {
    let Some(name) = cfg.preset.clone() else {
        return Ok(());
    };
    let pairs: &[(&str, &str)] = &[
        ("reproduce-fig3", "gap-scan"),
        ("fig1", "fig1"),
        ("fig2", "transverse"),
        ("n15", "satstats"),
        ("fig16b", "fig16b"),
        ("grover", "tstar"),
    ];
    let Some(&(_, expect)) = pairs.iter().find(|&&(p, _)| p == name) else {
        let names: Vec<&str> = pairs.iter().map(|&(p, _)| p).collect();
        return Err(usage(format!("unknown preset {name:?}; expected one of {names:?}")));
    };
    if cfg.command != expect {
        return Err(usage(format!(
            "preset {name:?} applies to the {expect:?} command, not {:?}",
            cfg.command
        )));
    }
    match name.as_str() {
        "reproduce-fig3" => {
            cfg.model.get_or_insert_with(|| "sat3".into());
            cfg.n.get_or_insert(20);
            cfg.alpha.get_or_insert(4.2);
            cfg.delta.get_or_insert(0.01);
            cfg.require_sat.get_or_insert(true);
        }
        "fig1" => {
            cfg.n.get_or_insert(100);
            cfg.alpha.get_or_insert(4.2);
            cfg.count.get_or_insert(20);
        }
        "fig2" => {
            cfg.model.get_or_insert_with(|| "sat3".into());
            cfg.alpha.get_or_insert(4.26);
            cfg.n_min.get_or_insert(8);
            cfg.n_max.get_or_insert(14);
            cfg.n_step.get_or_insert(2);
            cfg.count.get_or_insert(24);
        }
        "n15" => {
            cfg.n.get_or_insert(15);
            cfg.alpha.get_or_insert(4.2);
            cfg.count.get_or_insert(10_000);
        }
        "fig16b" => {}
        "grover" => {
            cfg.model.get_or_insert_with(|| "grover".into());
            cfg.n_min.get_or_insert(8);
            cfg.n_max.get_or_insert(14);
        }
        _ => unreachable!(),
    }
    Ok(())
}

/// Fills per-command defaults and rejects inconsistent requests. The
/// returned config is what gets hashed and persisted, so all implicit
/// choices become explicit here.
pub fn resolve(mut cfg: ExperimentConfig) -> Result<ExperimentConfig, UsageError> {
    apply_preset(&mut cfg)?;
    cfg.seed.get_or_insert(0);
    cfg.out.get_or_insert_with(|| "qanneal-out".into());

    let cmd = cfg.command.clone();
    let needs_model =
        DOS_COMMANDS.contains(&cmd.as_str()) || cmd == "gen" || cmd == "transverse";
    if needs_model {
        let model = cfg.model.get_or_insert_with(|| "sat3".into()).clone();
        if !MODELS.contains(&model.as_str()) {
            return Err(usage(format!("unknown model {model:?}; expected one of {MODELS:?}")));
        }
        if (cmd == "gen" || cmd == "transverse") && model == "grover" {
            return Err(usage(format!("the {cmd} command supports sat3 and three-spin only")));
        }
        let multi_n = cfg.n_min.is_some() || cfg.n_max.is_some();
        if multi_n && !(cmd == "tstar" || cmd == "transverse") {
            return Err(usage(format!("--n-min/--n-max are not valid for {cmd}")));
        }
        if multi_n {
            let lo = cfg.n_min.ok_or_else(|| usage("--n-min requires --n-max"))?;
            let hi = cfg.n_max.ok_or_else(|| usage("--n-max requires --n-min"))?;
            if lo > hi {
                return Err(usage(format!("--n-min {lo} exceeds --n-max {hi}")));
            }
            cfg.n_step.get_or_insert(if cmd == "transverse" { 2 } else { 1 });
            if cfg.n_step == Some(0) {
                return Err(usage("--n-step must be positive"));
            }
        } else if cfg.n.is_none() {
            return Err(usage(format!("{cmd} requires --n")));
        }
        match model.as_str() {
            "sat3" => {
                if cfg.m.is_none() {
                    cfg.alpha.get_or_insert(4.2);
                } else if multi_n {
                    return Err(usage("use --alpha, not --m, with an n range"));
                }
            }
            "three-spin" | "grover" => {
                if cfg.m.is_some() || cfg.alpha.is_some() {
                    return Err(usage(format!("--m/--alpha do not apply to {model}")));
                }
            }
            _ => unreachable!(),
        }
    }

    match cmd.as_str() {
        "gen" => {}
        "dos" => {
            cfg.require_sat.get_or_insert(false);
        }
        "gap-scan" | "min-gap" | "schedule" | "bounds" | "evolve" | "tstar" => {
            cfg.delta.get_or_insert(0.01);
            if !(cfg.delta.unwrap() > 0.0) {
                return Err(usage("--delta must be positive"));
            }
            cfg.require_sat.get_or_insert(true);
            let default_grid: usize = match cmd.as_str() {
                "gap-scan" => 256,
                "min-gap" => 0,
                _ => 96,
            };
            let grid = *cfg.grid.get_or_insert(default_grid);
            if cmd == "gap-scan" && grid == 0 {
                return Err(usage("--grid must be positive: an empty scan has no output"));
            }
            if (cmd == "schedule" || cmd == "bounds" || cmd == "evolve" || cmd == "tstar")
                && grid < 8
            {
                return Err(usage("--grid must be at least 8 for schedule construction"));
            }
            match cmd.as_str() {
                "evolve" => {
                    if cfg.t_total.is_none() {
                        return Err(usage("evolve requires --t (total annealing time)"));
                    }
                    if !(cfg.t_total.unwrap() > 0.0) {
                        return Err(usage("--t must be positive"));
                    }
                    cfg.log_points.get_or_insert(64);
                }
                "tstar" => {
                    let p = *cfg.target_p.get_or_insert(0.5);
                    if !(p > 0.0 && p < 1.0) {
                        return Err(usage("--target-p must lie strictly between 0 and 1"));
                    }
                    cfg.t_cap.get_or_insert(1e7);
                }
                "bounds" => {
                    let eps = *cfg.epsilon.get_or_insert(0.1);
                    if !(eps > 0.0) {
                        return Err(usage("--epsilon must be positive"));
                    }
                    cfg.target_p.get_or_insert(0.5);
                }
                _ => {}
            }
        }
        "transverse" => {
            cfg.count.get_or_insert(8);
            if cfg.count == Some(0) {
                return Err(usage("--count must be positive"));
            }
            if cfg.grid.is_some() {
                return Err(usage(
                    "the transverse scan uses a fixed 64-point coarse grid; --grid does not apply",
                ));
            }
        }
        "satstats" => {
            if cfg.n.is_none() {
                return Err(usage("satstats requires --n"));
            }
            if cfg.m.is_none() {
                cfg.alpha.get_or_insert(4.2);
            }
            cfg.count.get_or_insert(0);
        }
        "fig1" => {
            cfg.n.get_or_insert(100);
            cfg.alpha.get_or_insert(4.2);
            cfg.count.get_or_insert(20);
            cfg.grid.get_or_insert(400);
            if cfg.count == Some(0) {
                return Err(usage("--count must be positive"));
            }
        }
        "fig16b" => {}
        _ => return Err(usage(format!("unknown command {cmd:?}"))),
    }

    if let Some(n) = cfg.n {
        if n == 0 {
            return Err(usage("--n must be positive"));
        }
    }
    Ok(cfg)
}

/// Effective `m` for sat3 at size `n`.
pub fn clause_count(cfg: &ExperimentConfig, n: u32) -> usize {
    cfg.m.unwrap_or_else(|| {
        (cfg.alpha.expect("alpha or m is resolved") * n as f64).round() as usize
    })
}

/// Accepts either a bare config or the `{tool, config}` wrapper the
/// toolkit writes next to its artifacts.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Wrapper {
        config: ExperimentConfig,
    }
    if let Ok(w) = serde_json::from_str::<Wrapper>(&text) {
        return Ok(w.config);
    }
    serde_json::from_str::<ExperimentConfig>(&text)
        .map_err(|e| usage(format!("{} is not a valid config: {e}", path.display())))
}
