//! Embedded reference dataset: 22 code models on a code-generation benchmark
//! (LCB) and a code-summarization benchmark (CXG), with normalized accuracy and
//! efficiency, published ratings, and parameter-count buckets.

use crate::measurements::{Measurement, NormalizedPoint, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBucket {
    /// Fewer than 3B parameters.
    Small,
    /// 3B up to 7B.
    Medium,
    /// 7B and above.
    Large,
}

impl SizeBucket {
    pub fn label(self) -> &'static str {
        match self {
            SizeBucket::Small => "<3B",
            SizeBucket::Medium => "3-7B",
            SizeBucket::Large => ">=7B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Lcb,
    Cxg,
}

impl Benchmark {
    pub const ALL: [Benchmark; 2] = [Benchmark::Lcb, Benchmark::Cxg];

    pub fn id(self) -> &'static str {
        match self {
            Benchmark::Lcb => "LCB",
            Benchmark::Cxg => "CXG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub acc: f64,
    pub eff: f64,
    pub circ: u32,
    pub oter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureRow {
    pub index: u32,
    pub model: &'static str,
    pub lcb: Scores,
    pub cxg: Scores,
    pub size: SizeBucket,
}

impl FixtureRow {
    pub fn scores(&self, benchmark: Benchmark) -> Scores {
        match benchmark {
            Benchmark::Lcb => self.lcb,
            Benchmark::Cxg => self.cxg,
        }
    }
}

const fn s(acc: f64, eff: f64, circ: u32, oter: u32) -> Scores {
    Scores {
        acc,
        eff,
        circ,
        oter,
    }
}

use SizeBucket::{Large, Medium, Small};

/// codegen-2B-mono is placed in the 3-7B bucket so the buckets hold 5, 6 and 11 models.
pub const ROWS: [FixtureRow; 22] = [
    FixtureRow {
        index: 1,
        model: "deepseek-coder-6.7b-base",
        lcb: s(0.23, 0.32, 2, 1),
        cxg: s(0.47, 0.23, 2, 3),
        size: Medium,
    },
    FixtureRow {
        index: 2,
        model: "starcoderbase-1b",
        lcb: s(0.0, 0.93, 2, 1),
        cxg: s(0.0, 0.88, 2, 1),
        size: Small,
    },
    FixtureRow {
        index: 3,
        model: "starcoder2-3b",
        lcb: s(0.02, 0.23, 1, 1),
        cxg: s(0.37, 0.32, 2, 3),
        size: Medium,
    },
    FixtureRow {
        index: 4,
        model: "CodeLlama-7b-Instruct-hf",
        lcb: s(0.21, 0.82, 3, 1),
        cxg: s(0.76, 0.23, 3, 4),
        size: Large,
    },
    FixtureRow {
        index: 5,
        model: "Qwen2.5-Coder-3B-Instruct",
        lcb: s(0.52, 0.96, 4, 3),
        cxg: s(0.36, 0.62, 3, 3),
        size: Medium,
    },
    FixtureRow {
        index: 6,
        model: "Qwen2.5-Coder-7B-Instruct",
        lcb: s(0.38, 0.78, 3, 2),
        cxg: s(0.36, 0.76, 3, 3),
        size: Large,
    },
    FixtureRow {
        index: 7,
        model: "Qwen2.5-Coder-1.5B",
        lcb: s(0.48, 1.0, 4, 3),
        cxg: s(0.31, 0.90, 3, 3),
        size: Small,
    },
    FixtureRow {
        index: 8,
        model: "deepseek-coder-1.3b-base",
        lcb: s(0.10, 0.78, 2, 1),
        cxg: s(0.70, 0.81, 4, 5),
        size: Small,
    },
    FixtureRow {
        index: 9,
        model: "deepseek-coder-7b-instruct",
        lcb: s(0.58, 0.77, 4, 3),
        cxg: s(0.35, 0.35, 2, 2),
        size: Large,
    },
    FixtureRow {
        index: 10,
        model: "starcoder2-7b",
        lcb: s(0.04, 0.15, 1, 1),
        cxg: s(0.56, 0.21, 2, 3),
        size: Large,
    },
    FixtureRow {
        index: 11,
        model: "codegen-350M-mono",
        lcb: s(0.02, 0.86, 2, 1),
        cxg: s(0.09, 0.86, 2, 1),
        size: Small,
    },
    FixtureRow {
        index: 12,
        model: "Qwen2.5-Coder-0.5B",
        lcb: s(0.27, 0.99, 3, 2),
        cxg: s(0.37, 0.91, 3, 3),
        size: Small,
    },
    FixtureRow {
        index: 13,
        model: "Yi-Coder-9B",
        lcb: s(0.33, 0.0, 1, 1),
        cxg: s(0.16, 0.0, 1, 1),
        size: Large,
    },
    FixtureRow {
        index: 14,
        model: "Replete-Coder-Llama3-8B",
        lcb: s(0.21, 0.74, 3, 1),
        cxg: s(0.20, 0.28, 2, 2),
        size: Large,
    },
    FixtureRow {
        index: 15,
        model: "speechless-code-mistral-7b",
        lcb: s(0.31, 0.85, 3, 2),
        cxg: s(0.37, 0.60, 3, 3),
        size: Large,
    },
    FixtureRow {
        index: 16,
        model: "stable-code-3b",
        lcb: s(0.06, 0.68, 2, 1),
        cxg: s(0.53, 0.68, 3, 4),
        size: Medium,
    },
    FixtureRow {
        index: 17,
        model: "CodeLlama-7b-Python-hf",
        lcb: s(0.15, 0.73, 2, 1),
        cxg: s(0.38, 0.23, 2, 2),
        size: Large,
    },
    FixtureRow {
        index: 18,
        model: "Seed-Coder-8B-Instruct",
        lcb: s(1.0, 0.88, 5, 5),
        cxg: s(0.31, 0.59, 3, 2),
        size: Large,
    },
    FixtureRow {
        index: 19,
        model: "CodeQwen1.5-7B-Chat",
        lcb: s(0.06, 0.99, 2, 1),
        cxg: s(0.03, 1.0, 2, 1),
        size: Large,
    },
    FixtureRow {
        index: 20,
        model: "Magicoder-S-DS-6.7B",
        lcb: s(0.42, 0.61, 3, 2),
        cxg: s(0.39, 0.42, 3, 3),
        size: Medium,
    },
    FixtureRow {
        index: 21,
        model: "granite-8b-code-base-4k",
        lcb: s(0.10, 1.0, 2, 1),
        cxg: s(1.0, 0.14, 2, 5),
        size: Large,
    },
    FixtureRow {
        index: 22,
        model: "codegen-2B-mono",
        lcb: s(0.02, 0.68, 2, 1),
        cxg: s(0.45, 0.57, 3, 3),
        size: Medium,
    },
];

pub fn points(benchmark: Benchmark) -> PointSet {
    PointSet {
        benchmark_id: benchmark.id().to_string(),
        points: ROWS
            .iter()
            .map(|r| {
                let sc = r.scores(benchmark);
                NormalizedPoint::new(r.model, sc.eff, sc.acc)
            })
            .collect(),
    }
}

/// Raw-valued stand-in for perturbation studies: accuracy is the normalized
/// accuracy and energy is `1 - eff`, so renormalizing reproduces [`points`].
pub fn raw_measurements(benchmark: Benchmark) -> Vec<Measurement> {
    ROWS.iter()
        .map(|r| {
            let sc = r.scores(benchmark);
            Measurement {
                model_id: r.model.to_string(),
                benchmark_id: benchmark.id().to_string(),
                accuracy_raw: sc.acc,
                energy_joules: 1.0 - sc.eff,
            }
        })
        .collect()
}

pub fn published_circ(benchmark: Benchmark) -> Vec<u32> {
    ROWS.iter().map(|r| r.scores(benchmark).circ).collect()
}

pub fn published_oter(benchmark: Benchmark) -> Vec<u32> {
    ROWS.iter().map(|r| r.scores(benchmark).oter).collect()
}

pub fn size_groups() -> Vec<(String, SizeBucket)> {
    ROWS.iter().map(|r| (r.model.to_string(), r.size)).collect()
}
