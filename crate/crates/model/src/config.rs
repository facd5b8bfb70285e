//! Architecture configuration and the named presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ModelError, Result};

/// Vocabulary size assumed when a config does not pin one.
pub const DEFAULT_VOCAB: usize = 91;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Conv2dStack,
    Parallel,
    InterleavedTimeFirst,
    InterleavedFreqFirst,
}

impl ExtractorKind {
    pub fn name(self) -> &'static str {
        match self {
            ExtractorKind::Conv2dStack => "conv2d_stack",
            ExtractorKind::Parallel => "parallel",
            ExtractorKind::InterleavedTimeFirst => "interleaved_time_first",
            ExtractorKind::InterleavedFreqFirst => "interleaved_freq_first",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    #[default]
    None,
    Time,
    Freq,
    Both,
}

impl CoordKind {
    pub fn channels(self) -> usize {
        match self {
            CoordKind::None => 0,
            CoordKind::Time | CoordKind::Freq => 1,
            CoordKind::Both => 2,
        }
    }

    pub fn has_time(self) -> bool {
        matches!(self, CoordKind::Time | CoordKind::Both)
    }

    pub fn has_freq(self) -> bool {
        matches!(self, CoordKind::Freq | CoordKind::Both)
    }

    fn short(self) -> &'static str {
        match self {
            CoordKind::None => "none",
            CoordKind::Time => "time",
            CoordKind::Freq => "freq",
            CoordKind::Both => "both",
        }
    }
}

/// Coordinate maps at the four sites where they can be appended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordSites {
    pub extractor_input: CoordKind,
    pub stem: CoordKind,
    pub resblocks: CoordKind,
    pub classifier: CoordKind,
}

impl CoordSites {
    pub fn all(kind: CoordKind) -> Self {
        Self { extractor_input: kind, stem: kind, resblocks: kind, classifier: kind }
    }

    pub fn label(&self) -> String {
        [self.extractor_input, self.stem, self.resblocks, self.classifier].map(CoordKind::short).join("-")
    }
}

/// Whether a time map spans the whole padded width or only the valid frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordSpan {
    #[default]
    Padded,
    Valid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub extractor: ExtractorKind,
    /// Extractor blocks.
    pub k: usize,
    pub n1: usize,
    /// Fusion 1x1 filters; 0 omits the fusion convolution.
    pub p: usize,
    /// Filters of the 2nd..4th layer of the plain 2D stack.
    pub n2: usize,
    pub n3: usize,
    pub n4: usize,
    pub e: usize,
    pub g: usize,
    pub j: usize,
    pub m: usize,
    pub c: usize,
    pub h: usize,
    pub o: usize,
    pub n_mels: usize,
    pub vocab_size: usize,
    pub coordmaps: CoordSites,
    #[serde(default)]
    pub coord_span: CoordSpan,
    pub malimo: bool,
    /// Hidden width of the acoustic controller's GRU.
    pub malimo_hidden: usize,
    pub dropout_p: f64,
}

impl ModelConfig {
    /// Starting point before the complexity reduction.
    pub fn initial(extractor: ExtractorKind) -> Self {
        Self {
            extractor,
            k: 3,
            n1: 16,
            p: 64,
            n2: 32,
            n3: 64,
            n4: 64,
            e: 32,
            g: 4096,
            j: 4,
            m: 128,
            c: 512,
            h: 1024,
            o: aqa_core::questengine::LABEL_COUNT,
            n_mels: 64,
            vocab_size: DEFAULT_VOCAB,
            coordmaps: CoordSites::all(CoordKind::Both),
            coord_span: CoordSpan::Padded,
            malimo: false,
            malimo_hidden: 512,
            dropout_p: 0.25,
        }
    }

    pub fn optimized(extractor: ExtractorKind) -> Self {
        Self {
            g: 512,
            coordmaps: CoordSites { resblocks: CoordKind::Time, ..CoordSites::default() },
            ..Self::initial(extractor)
        }
    }

    /// Optimized parallel network shrunk for desk-scale overfitting runs.
    pub fn micro() -> Self {
        Self { n1: 8, g: 64, m: 32, malimo_hidden: 64, ..Self::optimized(ExtractorKind::Parallel) }
    }

    /// Channel count of the n-th (0-based) extractor block.
    pub fn block_filters(&self, block: usize) -> usize {
        self.n1 << block
    }

    /// Channels leaving the feature extractor.
    pub fn feature_channels(&self) -> usize {
        match self.extractor {
            ExtractorKind::Conv2dStack => self.n4,
            ExtractorKind::Parallel if self.p == 0 => 2 * self.block_filters(self.k - 1),
            ExtractorKind::InterleavedTimeFirst | ExtractorKind::InterleavedFreqFirst if self.p == 0 => {
                self.block_filters(self.k - 1)
            }
            _ => self.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("k", self.k),
            ("n1", self.n1),
            ("e", self.e),
            ("g", self.g),
            ("j", self.j),
            ("m", self.m),
            ("c", self.c),
            ("h", self.h),
            ("o", self.o),
            ("n_mels", self.n_mels),
            ("vocab_size", self.vocab_size),
            ("malimo_hidden", self.malimo_hidden),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be at least 1")));
        }
        if self.extractor == ExtractorKind::Conv2dStack && [self.n2, self.n3, self.n4].contains(&0) {
            return Err(ModelError::Config("n2, n3 and n4 must be at least 1".into()));
        }
        if self.k > 16 {
            return Err(ModelError::Config(format!("k = {} blocks is unreasonable", self.k)));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ModelError::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    /// Stable content hash used to pair checkpoints with configs.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Named configurations shipped with the crate, in report order.
pub fn presets() -> Vec<(String, ModelConfig)> {
    use ExtractorKind::*;
    let mut out = Vec::new();
    for (tag, kind) in [
        ("parallel", Parallel),
        ("conv2d", Conv2dStack),
        ("interleaved_time", InterleavedTimeFirst),
        ("interleaved_freq", InterleavedFreqFirst),
    ] {
        out.push((format!("initial_{tag}"), ModelConfig::initial(kind)));
        out.push((format!("optimized_{tag}"), ModelConfig::optimized(kind)));
        out.push((format!("optimized_{tag}_malimo"), ModelConfig { malimo: true, ..ModelConfig::optimized(kind) }));
    }
    for (label, sites) in coordmap_placements() {
        out.push((format!("coordmaps_{label}"), ModelConfig { coordmaps: sites, ..ModelConfig::initial(Parallel) }));
    }
    out.push(("micro".into(), ModelConfig::micro()));
    out
}

pub fn preset(name: &str) -> Option<ModelConfig> {
    presets().into_iter().find(|(n, _)| n == name).map(|(_, c)| c)
}

/// The thirteen placements of time and frequency maps compared on the
/// parallel network.
pub fn coordmap_placements() -> Vec<(String, CoordSites)> {
    use CoordKind::*;
    let rows = [
        [None, None, Time, None],
        [None, Time, None, None],
        [None, None, Both, None],
        [None, Both, None, None],
        [Time, None, None, None],
        [Both, None, None, None],
        [None, None, None, Freq],
        [None, None, None, None],
        [None, None, None, Both],
        [None, None, Freq, None],
        [None, Freq, None, None],
        [None, None, None, Time],
        [Freq, None, None, None],
    ];
    rows.iter()
        .map(|r| {
            let sites = CoordSites { extractor_input: r[0], stem: r[1], resblocks: r[2], classifier: r[3] };
            (sites.label(), sites)
        })
        .collect()
}
