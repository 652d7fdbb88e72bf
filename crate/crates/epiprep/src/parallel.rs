//! Multi-threaded support counting.

use epiprep_core::geometry::{FundamentalMatrix, PointPair};
use epiprep_core::global_rank::{pack, support_count};
use rayon::prelude::*;

const CHUNK: usize = 64;

/// Same counts as [`epiprep_core::global_rank::count_sfm`], spread over the
/// rayon pool by chunks of matches.
pub fn par_count_sfm(pairs: &[PointPair], fs: &[FundamentalMatrix], tau: f64) -> Vec<u32> {
    let packed = pack(fs);
    let tau2 = tau * tau;
    let mut out = vec![0u32; pairs.len()];
    out.par_chunks_mut(CHUNK).zip(pairs.par_chunks(CHUNK)).for_each(|(o, p)| {
        for (c, pair) in o.iter_mut().zip(p) {
            *c = support_count(pair, &packed, tau2);
        }
    });
    out
}
