use cipai_core::autodiff::Tensor;

use super::FormatError;

/// Appends `rank`, the dims and the values, all little-endian 64-bit.
pub fn write_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.rank() as u64).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn take<'a>(input: &mut &'a [u8], n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
    if input.len() < n {
        return Err(FormatError::Truncated { what });
    }
    let (head, rest) = input.split_at(n);
    *input = rest;
    Ok(head)
}

pub(crate) fn read_u64(input: &mut &[u8], what: &'static str) -> Result<u64, FormatError> {
    let b = take(input, 8, what)?;
    Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
}

/// Reads one tensor written by [`write_tensor`], advancing `input`.
pub fn read_tensor(input: &mut &[u8]) -> Result<Tensor, FormatError> {
    let rank = read_u64(input, "tensor rank")?;
    if rank > 8 {
        return Err(FormatError::Tensor(format!("rank {rank} is not supported")));
    }
    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        shape.push(read_u64(input, "tensor dims")? as usize);
    }
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= input.len()))
        .ok_or(FormatError::Truncated {
            what: "tensor values",
        })?;
    let bytes = take(input, n * 8, "tensor values")?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::new(shape, data).map_err(|e| FormatError::Tensor(e.to_string()))
}
