//! Range Asymmetric Numeral Systems coder with 12-bit fixed-point
//! probability tables.
//!
//! The coder is a stack: symbols are encoded in reverse so the decoder
//! reads them back in forward order. Encoder and decoder must share the
//! exact same quantized CDF; the hot path is integer-only.

use crate::error::{Error, Result};

/// Fixed-point probability precision, frozen in the bitstream.
pub const PROB_BITS: u32 = 12;
pub const PROB_SCALE: u32 = 1 << PROB_BITS;

const RANS_L: u32 = 1 << 23;

/// Quantized CDF over `S` symbols: `cdf[s]..cdf[s+1]` is symbol `s`'s slot
/// range, `cdf[S] == PROB_SCALE`, and every symbol has at least one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedCdf {
    pub cdf: Vec<u32>,
}

impl QuantizedCdf {
    pub fn symbol_count(&self) -> usize {
        self.cdf.len() - 1
    }

    #[inline]
    pub fn start_freq(&self, symbol: u32) -> (u32, u32) {
        let s = symbol as usize;
        (self.cdf[s], self.cdf[s + 1] - self.cdf[s])
    }

    /// Symbol whose slot range contains `slot`.
    #[inline]
    pub fn symbol_for_slot(&self, slot: u32) -> u32 {
        // partition_point: first s with cdf[s+1] > slot.
        let mut lo = 0usize;
        let mut hi = self.symbol_count();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cdf[mid + 1] <= slot {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo as u32
    }

    /// Probability implied by the fixed-point table.
    pub fn prob(&self, symbol: u32) -> f64 {
        let (_, f) = self.start_freq(symbol);
        f as f64 / PROB_SCALE as f64
    }
}

/// Deterministically quantize a probability vector into frequencies that
/// sum to `PROB_SCALE` with every entry >= 1. Requires `S <= PROB_SCALE`.
pub fn quantize_cdf(probs: &[f64]) -> Result<QuantizedCdf> {
    let s = probs.len();
    if s == 0 || s > PROB_SCALE as usize {
        return Err(Error::InvalidArgument(format!(
            "quantize_cdf: {s} symbols not in 1..={PROB_SCALE}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("quantize_cdf: zero total mass".into()));
    }
    let mut freqs: Vec<u32> = probs
        .iter()
        .map(|&p| ((p / total * PROB_SCALE as f64).round() as u32).max(1))
        .collect();
    let mut sum: i64 = freqs.iter().map(|&f| f as i64).sum();
    // Repair rounding drift one slot at a time against the current largest
    // frequency (relative distortion ~1/freq is smallest there); index order
    // breaks ties so the result is deterministic.
    while sum != PROB_SCALE as i64 {
        let shrinking = sum > PROB_SCALE as i64;
        let j = (0..s)
            .filter(|&j| !shrinking || freqs[j] > 1)
            .max_by_key(|&j| freqs[j])
            .ok_or_else(|| Error::InvalidArgument("quantize_cdf: cannot normalize".into()))?;
        if shrinking {
            freqs[j] -= 1;
            sum -= 1;
        } else {
            freqs[j] += 1;
            sum += 1;
        }
    }
    let mut cdf = Vec::with_capacity(s + 1);
    let mut acc = 0u32;
    cdf.push(0);
    for &f in &freqs {
        acc += f;
        cdf.push(acc);
    }
    debug_assert_eq!(acc, PROB_SCALE);
    Ok(QuantizedCdf { cdf })
}

/// Per-symbol CDF source. The shared variant uses one table for the whole
/// stream; the per-index variant rebuilds a table for each position (used by
/// the spatial Gaussian model, where every point has its own distribution).
pub enum AnsModel<'a> {
    Shared(&'a QuantizedCdf),
    PerIndex(Box<dyn Fn(usize) -> QuantizedCdf + Sync + 'a>),
}

impl AnsModel<'_> {
    fn with_cdf<R>(&self, index: usize, f: impl FnOnce(&QuantizedCdf) -> R) -> R {
        match self {
            AnsModel::Shared(cdf) => f(cdf),
            AnsModel::PerIndex(build) => f(&build(index)),
        }
    }
}

/// Encode a symbol stream. The output is self-delimiting given the symbol
/// count; an empty stream produces the 4-byte initial state only.
pub fn ans_encode(symbols: &[u32], model: &AnsModel) -> Result<Vec<u8>> {
    let mut state: u32 = RANS_L;
    let mut out: Vec<u8> = Vec::with_capacity(symbols.len() + 4);
    for (i, &sym) in symbols.iter().enumerate().rev() {
        let (start, freq) = model.with_cdf(i, |cdf| {
            if (sym as usize) < cdf.symbol_count() {
                Ok(cdf.start_freq(sym))
            } else {
                Err(Error::SymbolOutOfRange {
                    symbol: sym,
                    bits: PROB_BITS as u8,
                })
            }
        })?;
        debug_assert!(freq > 0);
        let x_max = ((RANS_L >> PROB_BITS) << 8) * freq;
        while state >= x_max {
            out.push((state & 0xFF) as u8);
            state >>= 8;
        }
        state = ((state / freq) << PROB_BITS) + (state % freq) + start;
    }
    out.extend_from_slice(&state.to_le_bytes());
    out.reverse();
    Ok(out)
}

/// Decode `n` symbols from `bytes` under the same model used to encode.
pub fn ans_decode(bytes: &[u8], model: &AnsModel, n: usize) -> Result<Vec<u32>> {
    if bytes.len() < 4 {
        return Err(Error::AnsTruncated);
    }
    // The encoder reversed the buffer, so the state is the first 4 bytes
    // in big-endian-of-little-endian order; reading forward restores it.
    let mut state =
        u32::from_le_bytes([bytes[3], bytes[2], bytes[1], bytes[0]]);
    let mut pos = 4usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let slot = state & (PROB_SCALE - 1);
        let (sym, start, freq) = model.with_cdf(i, |cdf| {
            let sym = cdf.symbol_for_slot(slot);
            let (start, freq) = cdf.start_freq(sym);
            (sym, start, freq)
        });
        out.push(sym);
        state = freq * (state >> PROB_BITS) + slot - start;
        while state < RANS_L {
            if pos >= bytes.len() {
                return Err(Error::AnsTruncated);
            }
            state = (state << 8) | bytes[pos] as u32;
            pos += 1;
        }
    }
    Ok(out)
}
