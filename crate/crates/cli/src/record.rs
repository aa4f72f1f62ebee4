//! Run records: one plain-text file per command invocation.
//!
//! ```text
//! fusionmf-run 1
//! command <name>
//! argv <arg> <arg> ...            shell-quoted, enough to repeat the run
//! config <key> <value>            one line per resolved setting
//! seed <u64>
//! time <phase> <seconds>          one line per phase
//! history <v_1> ... <v_n>         objective per sweep (fit only)
//! output <path>                   one line per written file
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fusionmf::solver::{Ranks, SolverConfig};

pub struct RunRecord {
    command: String,
    argv: Vec<String>,
    config: Vec<(String, String)>,
    seed: Option<u64>,
    timings: Vec<(String, f64)>,
    history: Vec<f64>,
    outputs: Vec<PathBuf>,
}

fn quote(arg: &str) -> String {
    let plain = !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./=,:+".contains(c));
    if plain {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        RunRecord {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: Vec::new(),
            seed: None,
            timings: Vec::new(),
            history: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn solver(&mut self, config: &SolverConfig<f64>) {
        let ranks = match &config.ranks {
            Ranks::Shared(d) => d.to_string(),
            Ranks::PerType(ks) => ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        };
        self.set("ranks", ranks);
        self.set("alpha", format!("{:e}", config.alpha));
        self.set("beta", format!("{:e}", config.beta));
        self.set("max_iters", config.max_iters);
        self.set("rel_tol", format!("{:e}", config.rel_tol));
        self.set("mode", config.mode.name());
        self.set("init", config.init.name());
        self.set("weight_scope", config.weight_scope.name());
        self.set("abort_on_divergence", config.abort_on_divergence);
        self.seed = Some(config.seed);
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Runs `f` and records its wall time under `phase`.
    pub fn time<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn history(&mut self, history: &[f64]) {
        self.history = history.to_vec();
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn format(&self) -> String {
        let mut out = format!("fusionmf-run 1\ncommand {}\nargv", self.command);
        for a in &self.argv {
            out.push(' ');
            out.push_str(&quote(a));
        }
        out.push('\n');
        for (k, v) in &self.config {
            let _ = writeln!(out, "config {k} {v}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed {seed}");
        }
        for (phase, secs) in &self.timings {
            let _ = writeln!(out, "time {phase} {secs:.6}");
        }
        if !self.history.is_empty() {
            let values: Vec<String> = self.history.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "history {}", values.join(" "));
        }
        for p in &self.outputs {
            let _ = writeln!(out, "output {}", p.display());
        }
        out
    }

    pub fn save(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push(path.to_path_buf());
        fs::write(path, self.format())
    }
}
