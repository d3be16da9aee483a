//! Signed feature hashing shared by the page and element encoders.

use xxhash_rust::xxh3::xxh3_64;

/// Adds a signed unit for `token` into `acc`.
pub fn hash_token(acc: &mut [f64], token: &str) {
    let h = xxh3_64(token.as_bytes());
    let idx = (h % acc.len() as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    acc[idx] += sign;
}

/// L2-normalises into `f32`; a zero vector stays zero.
pub fn normalize(acc: &[f64]) -> Vec<f32> {
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; acc.len()];
    }
    acc.iter().map(|v| (v / norm) as f32).collect()
}

