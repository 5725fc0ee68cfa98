//! Core library for a multimodal neural motion planner: workspace geometry,
//! robot models, classical sampling-based planners, a small feed-forward
//! network stack with mixture-density heads, and the online planning
//! algorithms built on top of them.

pub mod classical;
pub mod geometry;
pub mod mdn;
pub mod nets;
pub mod neuralnet;
pub mod plan;
pub mod robots;

pub mod seeding {
    //! Deterministic seed derivation so every pipeline stage gets its own
    //! independent, reproducible RNG stream.

    /// splitmix64 finalizer; good avalanche behavior for seed mixing.
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Derive a child seed from `(master, tag, index)`. Distinct tags give
    /// disjoint streams.
    pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
        let mut h = mix(master);
        for b in tag.as_bytes() {
            h = mix(h ^ u64::from(*b));
        }
        mix(h ^ index)
    }

}
