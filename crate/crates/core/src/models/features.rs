use crate::error::{Error, Result};

/// `[u1, u2, u1 - u2, u1 * u2, |u1 - u2|]`, elementwise, length `5d`.
pub fn concat_features(u1: &[f64], u2: &[f64]) -> Result<Vec<f64>> {
    if u1.len() != u2.len() {
        return Err(Error::DimensionMismatch {
            expected: u1.len(),
            actual: u2.len(),
        });
    }
    let mut out = Vec::with_capacity(5 * u1.len());
    out.extend_from_slice(u1);
    out.extend_from_slice(u2);
    out.extend(u1.iter().zip(u2).map(|(a, b)| a - b));
    out.extend(u1.iter().zip(u2).map(|(a, b)| a * b));
    out.extend(u1.iter().zip(u2).map(|(a, b)| (a - b).abs()));
    Ok(out)
}
