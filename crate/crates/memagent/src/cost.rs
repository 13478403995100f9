//! FLOP accounting: quadratic full-context decoding versus the staged
//! chunk-and-memory workflow.
//!
//! The dense-decoder estimate is a frozen closed form (golden-tested so
//! results reproduce bit for bit):
//!
//! ```text
//! flops(seq) = 2 * seq * P  +  2 * hidden * layers * seq * (seq - 1)
//! P = layers * (2*hidden^2 + 2*hidden*kv_hidden + 3*hidden*ffn) + hidden*vocab
//! kv_hidden = hidden * num_kv_heads / num_attention_heads
//! ```
//!
//! The linear term charges every matmul weight twice per token (multiply and
//! add): the four attention projections with grouped KV heads, a three-matrix
//! gated FFN, and the vocabulary head. The attention term charges score and
//! value mixing against the causal prefix, so a length-1 sequence costs
//! exactly the per-token linear cost.
//!
//! The staged workflow decomposes into an initializing pass, `k = ceil(c/N)`
//! memory updates, and a final answer pass; each stage is costed as a dense
//! decode of its own (input + output) tokens, never of the whole document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("invalid model shape: {0}")]
    BadShape(String),
    #[error("sequence length must be >= 1")]
    BadSeqLen,
    #[error("stage-plan parameters must all be positive")]
    BadPlanParams,
    #[error("context grid must be strictly increasing")]
    BadGrid,
}

/// Transformer dimensions for the FLOP estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub ffn_size: usize,
    pub num_attention_heads: usize,
    pub num_kv_heads: usize,
    pub vocab_size: usize,
}

impl ModelShape {
    /// A 7B-class decoder with grouped KV heads; the default shape for
    /// cost comparisons.
    pub fn seven_b() -> Self {
        ModelShape {
            num_layers: 28,
            hidden_size: 3584,
            ffn_size: 18944,
            num_attention_heads: 28,
            num_kv_heads: 4,
            vocab_size: 152_064,
        }
    }

    /// Tiny shape for hand-checkable tests.
    pub fn toy() -> Self {
        ModelShape {
            num_layers: 2,
            hidden_size: 64,
            ffn_size: 256,
            num_attention_heads: 2,
            num_kv_heads: 2,
            vocab_size: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.num_layers == 0
            || self.hidden_size == 0
            || self.ffn_size == 0
            || self.num_attention_heads == 0
            || self.num_kv_heads == 0
            || self.vocab_size == 0
        {
            return Err(CostError::BadShape("all dimensions must be positive".into()));
        }
        if self.hidden_size % self.num_attention_heads != 0 {
            return Err(CostError::BadShape(format!(
                "hidden {} not divisible by {} heads",
                self.hidden_size, self.num_attention_heads
            )));
        }
        if self.num_attention_heads % self.num_kv_heads != 0 {
            return Err(CostError::BadShape(format!(
                "{} attention heads not divisible by {} kv heads",
                self.num_attention_heads, self.num_kv_heads
            )));
        }
        Ok(())
    }

    /// Per-token linear-layer parameter count times two (multiply + add).
    fn linear_flops_per_token(&self) -> f64 {
        let h = self.hidden_size as f64;
        let kv_hidden = h * self.num_kv_heads as f64 / self.num_attention_heads as f64;
        let per_layer = 2.0 * h * h + 2.0 * h * kv_hidden + 3.0 * h * self.ffn_size as f64;
        2.0 * (self.num_layers as f64 * per_layer + h * self.vocab_size as f64)
    }
}

/// Dense-decoder FLOPs for one sequence of `seq_len` tokens.
pub fn flops_dense(shape: &ModelShape, seq_len: usize) -> Result<f64, CostError> {
    shape.validate()?;
    if seq_len == 0 {
        return Err(CostError::BadSeqLen);
    }
    let seq = seq_len as f64;
    let linear = seq * shape.linear_flops_per_token();
    let attention =
        2.0 * shape.hidden_size as f64 * shape.num_layers as f64 * seq * (seq - 1.0);
    Ok(linear + attention)
}

/// Prompt-overhead constants used by the stage decomposition.
pub const UPDATE_OVERHEAD_TOKENS: usize = 200;
pub const FINAL_OVERHEAD_TOKENS: usize = 100;

/// One costed pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub label: String,
    pub input_tokens: usize,
    pub output_tokens: usize,
}

impl Stage {
    pub fn total_tokens(&self) -> usize {
        self.input_tokens + self.output_tokens
    }
}

/// The staged decomposition of one episode for FLOP accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    pub query_tokens: usize,
    pub output_tokens: usize,
    pub chunk_budget: usize,
    pub context_tokens: usize,
}

impl StagePlan {
    /// Number of memory-update stages, `ceil(c / N)`.
    pub fn update_stages(&self) -> usize {
        self.context_tokens.div_ceil(self.chunk_budget)
    }

    /// Tokens processed across all stages.
    pub fn total_tokens(&self) -> usize {
        self.stages.iter().map(Stage::total_tokens).sum()
    }

    /// Total FLOPs: the sum of a dense decode per stage.
    pub fn flops(&self, shape: &ModelShape) -> Result<f64, CostError> {
        let mut total = 0.0;
        for stage in &self.stages {
            total += flops_dense(shape, stage.total_tokens())?;
        }
        Ok(total)
    }
}

/// Decompose an episode: an initializing pass of `q + 200 + o` tokens,
/// `ceil(c/N)` memory updates of `q + 200 + N + o`, and a final answer pass
/// of `q + 100 + o`.
pub fn plan_memagent(q: usize, o: usize, n: usize, c: usize) -> Result<StagePlan, CostError> {
    if q == 0 || o == 0 || n == 0 || c == 0 {
        return Err(CostError::BadPlanParams);
    }
    let k = c.div_ceil(n);
    let mut stages = Vec::with_capacity(k + 2);
    stages.push(Stage {
        label: "init".into(),
        input_tokens: q + UPDATE_OVERHEAD_TOKENS,
        output_tokens: o,
    });
    for i in 0..k {
        stages.push(Stage {
            label: format!("update_{}", i + 1),
            input_tokens: q + UPDATE_OVERHEAD_TOKENS + n,
            output_tokens: o,
        });
    }
    stages.push(Stage {
        label: "final".into(),
        input_tokens: q + FINAL_OVERHEAD_TOKENS,
        output_tokens: o,
    });
    Ok(StagePlan {
        stages,
        query_tokens: q,
        output_tokens: o,
        chunk_budget: n,
        context_tokens: c,
    })
}

/// One row of the cost comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub context_tokens: usize,
    pub baseline_flops: f64,
    pub memagent_flops: f64,
    /// `baseline / memagent`.
    pub ratio: f64,
}

/// Evaluate both cost models across a context grid. The baseline decodes the
/// whole `q + c + o` sequence at once; the staged cost sums its passes.
pub fn compare(
    shape: &ModelShape,
    q: usize,
    o: usize,
    n: usize,
    c_grid: &[usize],
) -> Result<Vec<CostRow>, CostError> {
    if c_grid.is_empty() || c_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CostError::BadGrid);
    }
    c_grid
        .iter()
        .map(|&c| {
            let baseline_flops = flops_dense(shape, q + c + o)?;
            let memagent_flops = plan_memagent(q, o, n, c)?.flops(shape)?;
            Ok(CostRow {
                context_tokens: c,
                baseline_flops,
                memagent_flops,
                ratio: baseline_flops / memagent_flops,
            })
        })
        .collect()
}

/// The default context grid: 8K doubling to 4M.
pub fn default_grid() -> Vec<usize> {
    (0..10).map(|i| (8 << 10) << i).collect()
}

/// CSV with columns `(c, baseline, memagent, ratio)`.
pub fn rows_to_csv(rows: &[CostRow]) -> String {
    let mut out = String::from("c,baseline_flops,memagent_flops,ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.context_tokens, row.baseline_flops, row.memagent_flops, row.ratio
        ));
    }
    out
}

/// Smallest grid entry where the staged cost beats the baseline.
pub fn crossover_point(rows: &[CostRow]) -> Option<usize> {
    rows.iter()
        .find(|r| r.memagent_flops < r.baseline_flops)
        .map(|r| r.context_tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shape_matches_hand_computed_golden() {
        // Arithmetic redone by hand, spreadsheet style:
        //   per layer: 2*64^2 = 8192; 2*64*64 = 8192; 3*64*256 = 49152
        //   P = 2*65536 + 64*1000 = 195072
        //   linear(128) = 2*128*195072 = 49_938_432
        //   attention(128) = 2*64*2*128*127 = 4_161_536
        let flops = flops_dense(&ModelShape::toy(), 128).unwrap();
        assert_eq!(flops, 49_938_432.0 + 4_161_536.0);
        assert_eq!(flops, 54_099_968.0);
    }

    #[test]
    fn seq_one_is_pure_linear_cost() {
        let shape = ModelShape::toy();
        let flops = flops_dense(&shape, 1).unwrap();
        assert_eq!(flops, shape.linear_flops_per_token());
        assert_eq!(flops, 390_144.0);
    }

    #[test]
    fn doubling_ratio_approaches_four() {
        let shape = ModelShape::seven_b();
        let big = 1 << 22;
        let a = flops_dense(&shape, big).unwrap();
        let b = flops_dense(&shape, 2 * big).unwrap();
        let ratio = b / a;
        assert!((3.8..=4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn invalid_shapes_rejected() {
        let mut shape = ModelShape::toy();
        shape.num_attention_heads = 3; // 64 % 3 != 0
        assert!(flops_dense(&shape, 8).is_err());
        assert!(flops_dense(&ModelShape::toy(), 0).is_err());
    }

    #[test]
    fn stage_plan_matches_hand_arithmetic() {
        let plan = plan_memagent(1024, 1024, 5000, 10_000).unwrap();
        assert_eq!(plan.update_stages(), 2);
        assert_eq!(plan.stages.len(), 4);
        let totals: Vec<usize> = plan.stages.iter().map(Stage::total_tokens).collect();
        assert_eq!(totals, vec![2248, 7248, 7248, 2148]);
    }

    #[test]
    fn exact_multiple_has_k_equal_c_over_n() {
        let plan = plan_memagent(1024, 1024, 5000, 5000).unwrap();
        assert_eq!(plan.update_stages(), 1);
        assert_eq!(plan.stages.len(), 3);
    }

    #[test]
    fn stage_count_is_k_plus_two_across_grid() {
        for c in default_grid() {
            let plan = plan_memagent(1024, 1024, 5000, c).unwrap();
            assert_eq!(plan.stages.len(), c.div_ceil(5000) + 2);
        }
    }

    #[test]
    fn staged_flops_step_exactly_at_chunk_multiples() {
        let shape = ModelShape::toy();
        let n = 100;
        let flops_at = |c: usize| plan_memagent(64, 64, n, c).unwrap().flops(&shape).unwrap();
        // flat within a chunk
        assert_eq!(flops_at(101), flops_at(150));
        assert_eq!(flops_at(101), flops_at(200));
        // jumps right after each multiple
        assert!(flops_at(201) > flops_at(200));
        assert!(flops_at(101) > flops_at(100));
    }

    #[test]
    fn both_curves_increase_over_doubling_grid() {
        let shape = ModelShape::seven_b();
        let rows = compare(&shape, 1024, 1024, 5000, &default_grid()).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].baseline_flops > pair[0].baseline_flops);
            assert!(pair[1].memagent_flops > pair[0].memagent_flops);
        }
    }

    #[test]
    fn crossover_on_default_grid_is_64k() {
        let shape = ModelShape::seven_b();
        let rows = compare(&shape, 1024, 1024, 5000, &default_grid()).unwrap();
        assert_eq!(crossover_point(&rows), Some(65_536));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![CostRow {
            context_tokens: 8192,
            baseline_flops: 1.0,
            memagent_flops: 2.0,
            ratio: 0.5,
        }];
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("c,baseline_flops,memagent_flops,ratio\n"));
        assert!(csv.contains("8192,1,2,0.5"));
    }

    #[test]
    fn bad_grid_rejected() {
        let shape = ModelShape::toy();
        assert!(compare(&shape, 10, 10, 10, &[]).is_err());
        assert!(compare(&shape, 10, 10, 10, &[100, 100]).is_err());
    }
}
