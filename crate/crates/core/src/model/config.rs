use std::fmt;
use std::str::FromStr;

use crate::candidates::FEATURE_DIM;
use crate::error::{Error, Result};

/// How many words on each side of the gap the zero pronoun encoder reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextWindow {
    Words(usize),
    /// Whole sentence on both sides.
    All,
}

impl ContextWindow {
    pub fn limit(self) -> usize {
        match self {
            ContextWindow::Words(n) => n,
            ContextWindow::All => usize::MAX,
        }
    }
}

impl fmt::Display for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextWindow::Words(n) => write!(f, "{n}"),
            ContextWindow::All => f.write_str("all"),
        }
    }
}

impl FromStr for ContextWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" | "inf" | "∞" => Ok(ContextWindow::All),
            n => n
                .parse()
                .map(ContextWindow::Words)
                .map_err(|_| Error::Config(format!("invalid context window `{s}`"))),
        }
    }
}

/// How the two last hidden states of the zero pronoun encoder are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpCombine {
    Concat,
    Average,
    Sum,
}

impl fmt::Display for ZpCombine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZpCombine::Concat => "concat",
            ZpCombine::Average => "average",
            ZpCombine::Sum => "sum",
        })
    }
}

impl FromStr for ZpCombine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "concat" => Ok(ZpCombine::Concat),
            "average" | "avg" => Ok(ZpCombine::Average),
            "sum" => Ok(ZpCombine::Sum),
            _ => Err(Error::Config(format!("invalid zp_combine `{s}`"))),
        }
    }
}

/// Which candidate representations reach the scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ablation {
    Full,
    /// Global block zeroed.
    LocalOnly,
    /// Local block zeroed.
    GlobalOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::GlobalOnly, Ablation::LocalOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::LocalOnly => "local_only",
            Ablation::GlobalOnly => "global_only",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Ablation::Full),
            "local_only" | "local" => Ok(Ablation::LocalOnly),
            "global_only" | "global" => Ok(Ablation::GlobalOnly),
            _ => Err(Error::Config(format!("invalid ablation `{s}`"))),
        }
    }
}

/// Number of embedding blocks fed to the local encoder: head, first, last,
/// two preceding, two following, and three averages.
pub const LOCAL_BLOCKS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub zp_hidden: usize,
    pub local_hidden: [usize; 3],
    pub global_hidden: usize,
    pub context_window: ContextWindow,
    pub zp_combine: ZpCombine,
    pub feature_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 100,
            zp_hidden: 100,
            local_hidden: [300, 200, 100],
            global_hidden: 100,
            context_window: ContextWindow::All,
            zp_combine: ZpCombine::Concat,
            feature_dim: FEATURE_DIM,
        }
    }
}

impl ModelConfig {
    /// Same architecture at small widths, for gradient checks and quick runs.
    pub fn compact() -> Self {
        ModelConfig {
            embedding_dim: 10,
            zp_hidden: 8,
            local_hidden: [16, 12, 8],
            global_hidden: 8,
            ..ModelConfig::default()
        }
    }

    pub fn zp_dim(&self) -> usize {
        match self.zp_combine {
            ZpCombine::Concat => 2 * self.zp_hidden,
            ZpCombine::Average | ZpCombine::Sum => self.zp_hidden,
        }
    }

    pub fn local_input_dim(&self) -> usize {
        LOCAL_BLOCKS * self.embedding_dim
    }

    pub fn local_dim(&self) -> usize {
        self.local_hidden[2]
    }

    pub fn global_dim(&self) -> usize {
        2 * self.global_hidden
    }

    pub fn scorer_input_dim(&self) -> usize {
        self.zp_dim() + self.local_dim() + self.global_dim() + self.feature_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embedding_dim", self.embedding_dim),
            ("zp_hidden", self.zp_hidden),
            ("local_hidden[0]", self.local_hidden[0]),
            ("local_hidden[1]", self.local_hidden[1]),
            ("local_hidden[2]", self.local_hidden[2]),
            ("global_hidden", self.global_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.feature_dim != FEATURE_DIM {
            return Err(Error::Config(format!(
                "feature_dim {} does not match schema dimension {FEATURE_DIM}",
                self.feature_dim
            )));
        }
        if self.context_window == ContextWindow::Words(0) {
            return Err(Error::Config("context_window must be positive or `all`".into()));
        }
        Ok(())
    }
}
