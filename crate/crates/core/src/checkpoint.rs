//! Text checkpoint encoding.
//!
//! ```text
//! PLCKPT 1
//! encoder.layer0.w1 7 8
//! encoder.layer0.b1 8
//!
//! 0.125 -0.5 ...
//! 0.0 0.0 ...
//! ```
//!
//! A manifest line per tensor (name followed by its dimensions), a blank
//! line, then one line of space-separated values per tensor in manifest
//! order. Values use the shortest decimal form that parses back to the same
//! binary64, so a save/load round trip is bit-exact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::tensor::{ModelState, Tensor};
use crate::{Error, Result};

pub const HEADER: &str = "PLCKPT 1";

pub fn encode_checkpoint(state: &ModelState) -> String {
    let entries: BTreeMap<&String, &Tensor> = state.params.iter().chain(state.buffers.iter()).collect();
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for (name, tensor) in &entries {
        out.push_str(name);
        for d in tensor.shape() {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
    }
    out.push('\n');
    for tensor in entries.values() {
        for (i, v) in tensor.data().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // Debug formatting is the shortest round-trip representation.
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn decode_checkpoint(text: &str) -> Result<ModelState> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::CorruptValue("missing PLCKPT 1 header".into()));
    }
    let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::CorruptValue("manifest is not terminated by a blank line".into()))?;
        if line.is_empty() {
            break;
        }
        let mut parts = line.split(' ');
        let name = parts.next().unwrap_or_default();
        if name.is_empty() {
            return Err(Error::CorruptValue(format!("bad manifest line {line:?}")));
        }
        let dims = parts
            .map(|d| d.parse::<usize>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::CorruptValue(format!("bad dimensions in {line:?}")))?;
        manifest.push((name.into(), dims));
    }

    let mut state = ModelState::new();
    for (name, shape) in manifest {
        let line = lines
            .next()
            .ok_or_else(|| Error::CorruptValue(format!("no values for {name}")))?;
        let values = line
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::CorruptValue(format!("{name}: cannot parse {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ManifestShapeMismatch {
                name,
                expected,
                found: values.len(),
            });
        }
        let tensor = Tensor::from_vec(shape, values)?;
        if ModelState::is_buffer_name(&name) {
            state.buffers.insert(name, tensor);
        } else {
            state.params.insert(name, tensor);
        }
    }
    if lines.any(|l| !l.is_empty()) {
        return Err(Error::CorruptValue("values beyond the manifest".into()));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use alloc::vec;
    use proptest::prelude::*;

    fn sample_state() -> ModelState {
        let mut rng = SplitMix64::new(5);
        let mut state = ModelState::new();
        state.params.insert("encoder.layer0.w1", Tensor::glorot(3, 2, &mut rng));
        state.params.insert("encoder.layer0.b1", Tensor::zeros(&[2]));
        state.params.insert("scalar", Tensor::scalar(1e-300));
        state.buffers.insert("encoder.layer0.bn1.running_mean", Tensor::row_vector(&[0.1, -0.0]));
        state.buffers.insert("encoder.layer0.bn1.running_var", Tensor::filled(&[2], 1.0));
        state
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let state = sample_state();
        let text = encode_checkpoint(&state);
        let back = decode_checkpoint(&text).unwrap();
        for (a, b) in state.params.iter().chain(state.buffers.iter()).zip(back.params.iter().chain(back.buffers.iter())) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.shape(), b.1.shape());
            let bits_a: Vec<u64> = a.1.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.1.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(encode_checkpoint(&back), text);
    }

    #[test]
    fn layout_matches_format() {
        let mut state = ModelState::new();
        state.params.insert("w", Tensor::matrix(1, 2, vec![0.5, 3.0]).unwrap());
        assert_eq!(encode_checkpoint(&state), "PLCKPT 1\nw 1 2\n\n0.5 3.0\n");
    }

    #[test]
    fn short_value_line_is_shape_mismatch() {
        let text = "PLCKPT 1\nw 2 3\n\n1 2 3 4 5\n";
        assert_eq!(
            decode_checkpoint(text),
            Err(Error::ManifestShapeMismatch {
                name: "w".into(),
                expected: 6,
                found: 5
            })
        );
    }

    #[test]
    fn garbage_is_corrupt() {
        assert!(matches!(decode_checkpoint("nope"), Err(Error::CorruptValue(_))));
        assert!(matches!(decode_checkpoint("PLCKPT 1\nw 2\n\n1 x\n"), Err(Error::CorruptValue(_))));
        assert!(matches!(decode_checkpoint("PLCKPT 1\nw 1\n"), Err(Error::CorruptValue(_))));
    }

    proptest! {
        #[test]
        fn any_finite_value_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..20)) {
            let mut state = ModelState::new();
            state.params.insert("p", Tensor::from_vec(vec![values.len()], values.clone()).unwrap());
            let back = decode_checkpoint(&encode_checkpoint(&state)).unwrap();
            let got: Vec<u64> = back.params.get("p").unwrap().data().iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, want);
        }
    }
}
