use crate::error::{Error, Result};
use crate::graph::FusionGraph;
use crate::scalar::Scalar;

/// Which terms of the joint objective are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Learned source weights plus the dispatch/aggregation term.
    Full,
    /// Unit weights on every declared block, no ridge terms, dispatch on.
    NoWeights,
    /// Learned source weights, dispatch off.
    NoDispatch,
    /// Unit weights, no dispatch: plain collective tri-factorization.
    Dfmf,
}

impl Mode {
    pub fn learns_weights(self) -> bool {
        matches!(self, Mode::Full | Mode::NoDispatch)
    }

    pub fn uses_dispatch(self) -> bool {
        matches!(self, Mode::Full | Mode::NoWeights)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoWeights => "no-weights",
            Mode::NoDispatch => "no-dispatch",
            Mode::Dfmf => "dfmf",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "no-weights" | "noWeights" => Ok(Mode::NoWeights),
            "no-dispatch" | "noDispatch" => Ok(Mode::NoDispatch),
            "dfmf" => Ok(Mode::Dfmf),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitScheme {
    RandomUniform,
    SvdAbs,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::RandomUniform => "random-uniform",
            InitScheme::SvdAbs => "svd-abs",
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-uniform" | "randomUniform" => Ok(InitScheme::RandomUniform),
            "svd-abs" | "svdAbs" => Ok(InitScheme::SvdAbs),
            other => Err(Error::InvalidConfig(format!("unknown init scheme {other:?}"))),
        }
    }
}

/// How the simplex constraint on the weight matrices is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightScope {
    /// Each row (all relations leaving one type, all views of one type) is a simplex.
    PerRow,
    /// All relation weights share one simplex, all view weights another.
    Global,
}

impl WeightScope {
    pub fn name(self) -> &'static str {
        match self {
            WeightScope::PerRow => "per-row",
            WeightScope::Global => "global",
        }
    }
}

impl std::str::FromStr for WeightScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-row" | "row" => Ok(WeightScope::PerRow),
            "global" => Ok(WeightScope::Global),
            other => Err(Error::InvalidConfig(format!("unknown weight scope {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ranks {
    /// One latent size `d` for every type, clipped to each type's cardinality.
    Shared(usize),
    /// Explicit `k_i` per type; each must satisfy `1 <= k_i <= n_i`.
    PerType(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub ranks: Ranks,
    /// Ridge on the relation weights.
    pub alpha: T,
    /// Ridge on the view weights.
    pub beta: T,
    pub max_iters: usize,
    /// Stop once the relative objective decrease of a sweep drops below this.
    pub rel_tol: T,
    pub mode: Mode,
    pub seed: u64,
    pub init: InitScheme,
    pub weight_scope: WeightScope,
    /// Relative per-sweep increase tolerated before the fit is declared divergent.
    pub divergence_slack: T,
    /// Abort with [`Error::Divergence`] on an increase beyond the slack.
    pub abort_on_divergence: bool,
}

/// Floor on multiplicative-update denominators.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            ranks: Ranks::Shared(40),
            alpha: T::lit(1e6),
            beta: T::lit(1e7),
            max_iters: 100,
            rel_tol: T::lit(1e-6),
            mode: Mode::Full,
            seed: 0,
            init: InitScheme::RandomUniform,
            weight_scope: WeightScope::PerRow,
            divergence_slack: T::lit(1e-8),
            abort_on_divergence: true,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_rank(mut self, d: usize) -> Self {
        self.ranks = Ranks::Shared(d);
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ridges(mut self, alpha: T, beta: T) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_rel_tol(mut self, tol: T) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    /// Latent size of every type, after clipping shared ranks to cardinalities.
    pub fn resolve_ranks(&self, graph: &FusionGraph<T>) -> Result<Vec<usize>> {
        let m = graph.num_types();
        match &self.ranks {
            Ranks::Shared(d) => {
                if *d == 0 {
                    return Err(Error::InvalidConfig("rank must be >= 1".into()));
                }
                Ok(graph.types().iter().map(|t| (*d).min(t.cardinality)).collect())
            }
            Ranks::PerType(ks) => {
                if ks.len() != m {
                    return Err(Error::InvalidConfig(format!(
                        "{} ranks given for {m} types",
                        ks.len()
                    )));
                }
                for (i, (&k, t)) in ks.iter().zip(graph.types()).enumerate() {
                    if k == 0 || k > t.cardinality {
                        return Err(Error::InvalidConfig(format!(
                            "rank {k} for type {i} ({}) must lie in 1..={}",
                            t.name, t.cardinality
                        )));
                    }
                }
                Ok(ks.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        let nonneg = |v: T, name: &str| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")))
            }
        };
        nonneg(self.alpha, "alpha")?;
        nonneg(self.beta, "beta")?;
        nonneg(self.rel_tol, "rel_tol")?;
        nonneg(self.divergence_slack, "divergence_slack")?;
        if self.mode.learns_weights() && (self.alpha == T::zero() || self.beta == T::zero()) {
            return Err(Error::InvalidConfig(
                "alpha and beta must be > 0 when weights are learned (zero ridge selects a single source)"
                    .into(),
            ));
        }
        Ok(())
    }
}
