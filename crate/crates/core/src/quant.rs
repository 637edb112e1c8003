//! Int8 requantization with TFLite per-channel reference semantics.
//!
//! A raw int32 accumulator is offset by the channel bias, multiplied by a
//! Q0.31 fixed-point multiplier with a power-of-two shift, shifted by the
//! output zero point and clamped to the activation range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw int32 sum leaving the compute stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawAccumulator(pub i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelQuant {
    /// Q0.31 multiplier in `[0, 2^31 - 1]`.
    pub qm: i32,
    /// Positive shifts scale up before the multiply, negative ones round down after it.
    pub shift: i32,
    pub bias: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantParamsWire", into = "QuantParamsWire")]
pub struct QuantParams {
    pub channels: Vec<ChannelQuant>,
    pub zero_point_rhs: i8,
    pub zero_point_out: i8,
    pub clamp_min: i8,
    pub clamp_max: i8,
}

/// JSON shape: `{"zero_point_rhs", "zero_point_out", "clamp": [lo, hi], "channels": [...]}`.
#[derive(Serialize, Deserialize)]
struct QuantParamsWire {
    zero_point_rhs: i32,
    zero_point_out: i32,
    clamp: [i32; 2],
    channels: Vec<ChannelQuant>,
}

impl TryFrom<QuantParamsWire> for QuantParams {
    type Error = Error;

    fn try_from(w: QuantParamsWire) -> Result<Self> {
        let narrow = |v: i32, what: &str| {
            i8::try_from(v)
                .map_err(|_| Error::InvalidQuantParams(format!("{what} {v} is not an int8")))
        };
        let qp = QuantParams {
            channels: w.channels,
            zero_point_rhs: narrow(w.zero_point_rhs, "zero_point_rhs")?,
            zero_point_out: narrow(w.zero_point_out, "zero_point_out")?,
            clamp_min: narrow(w.clamp[0], "clamp min")?,
            clamp_max: narrow(w.clamp[1], "clamp max")?,
        };
        qp.validate()?;
        Ok(qp)
    }
}

impl From<QuantParams> for QuantParamsWire {
    fn from(q: QuantParams) -> Self {
        QuantParamsWire {
            zero_point_rhs: q.zero_point_rhs as i32,
            zero_point_out: q.zero_point_out as i32,
            clamp: [q.clamp_min as i32, q.clamp_max as i32],
            channels: q.channels,
        }
    }
}

impl QuantParams {
    /// Same multiplier, shift and bias on every channel, full int8 clamp.
    pub fn uniform(
        n: usize,
        channel: ChannelQuant,
        zero_point_rhs: i8,
        zero_point_out: i8,
    ) -> Self {
        Self {
            channels: vec![channel; n],
            zero_point_rhs,
            zero_point_out,
            clamp_min: i8::MIN,
            clamp_max: i8::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clamp_min > self.clamp_max {
            return Err(Error::InvalidQuantParams(format!(
                "clamp_min {} exceeds clamp_max {}",
                self.clamp_min, self.clamp_max
            )));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.qm < 0 {
                return Err(Error::InvalidQuantParams(format!(
                    "channel {i}: negative multiplier"
                )));
            }
            if !(-31..=31).contains(&c.shift) {
                return Err(Error::InvalidQuantParams(format!(
                    "channel {i}: shift {} outside [-31, 31]",
                    c.shift
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Decomposes a positive real scale into a Q0.31 multiplier and shift so
/// that `real ≈ qm / 2^31 * 2^shift`.
pub fn quantize_multiplier(real: f64) -> (i32, i32) {
    if real <= 0.0 || !real.is_finite() {
        return (0, 0);
    }
    let mut shift = real.log2().floor() as i32 + 1;
    let mut frac = real / 2f64.powi(shift);
    // log2 rounding can land one off the [0.5, 1) band
    while frac >= 1.0 {
        frac /= 2.0;
        shift += 1;
    }
    while frac < 0.5 {
        frac *= 2.0;
        shift -= 1;
    }
    let mut q = (frac * (1u64 << 31) as f64).round() as i64;
    if q == 1 << 31 {
        q /= 2;
        shift += 1;
    }
    if shift < -31 {
        return (0, 0);
    }
    (q as i32, shift.min(31))
}

/// Saturating rounding doubling high multiply.
///
/// Returns the high word of `2·a·b` rounded to nearest; `a = b = i32::MIN`
/// saturates to `i32::MAX`.
#[inline]
pub fn srdhm(a: i32, b: i32) -> i32 {
    if a == i32::MIN && b == i32::MIN {
        return i32::MAX;
    }
    let ab = a as i64 * b as i64;
    let nudge: i64 = if ab >= 0 { 1 << 30 } else { 1 - (1 << 30) };
    ((ab + nudge) / (1i64 << 31)) as i32
}

/// Arithmetic right shift rounding to nearest, ties away from zero.
#[inline]
pub fn rounding_rshift(x: i32, exponent: u32) -> i32 {
    debug_assert!(exponent <= 31);
    if exponent == 0 {
        return x;
    }
    let mask = ((1i64 << exponent) - 1) as i32;
    let remainder = x & mask;
    let threshold = (mask >> 1) + i32::from(x < 0);
    (x >> exponent) + i32::from(remainder > threshold)
}

/// Scales one accumulator of output channel `channel` to int8.
///
/// Bias addition and the pre-multiply left shift saturate to the int32 range.
#[inline]
pub fn requantize(acc: RawAccumulator, channel: usize, qp: &QuantParams) -> i8 {
    let c = &qp.channels[channel];
    let mut t = acc.0.saturating_add(c.bias);
    t = if c.shift > 0 {
        let widened = (t as i64) << c.shift;
        srdhm(widened.clamp(i32::MIN as i64, i32::MAX as i64) as i32, c.qm)
    } else {
        rounding_rshift(srdhm(t, c.qm), (-c.shift) as u32)
    };
    let out = t.saturating_add(qp.zero_point_out as i32);
    out.clamp(qp.clamp_min as i32, qp.clamp_max as i32) as i8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(qm: i32, shift: i32, bias: i32, zp_out: i8, lo: i8, hi: i8) -> QuantParams {
        QuantParams {
            channels: vec![ChannelQuant { qm, shift, bias }],
            zero_point_rhs: 0,
            zero_point_out: zp_out,
            clamp_min: lo,
            clamp_max: hi,
        }
    }

    #[test]
    fn srdhm_saturates_only_at_min_squared() {
        assert_eq!(srdhm(i32::MIN, i32::MIN), i32::MAX);
        assert_eq!(srdhm(i32::MIN, i32::MAX), -i32::MAX);
    }

    #[test]
    fn srdhm_known_values() {
        assert_eq!(srdhm(2, 1 << 30), 1);
        assert_eq!(srdhm(3, 1 << 30), 2); // 1.5 rounds up
        assert_eq!(srdhm(-3, 1 << 30), -1); // -1.5 rounds up
        assert_eq!(srdhm(0, 12345), 0);
    }

    #[test]
    fn rounding_rshift_ties_away_from_zero() {
        assert_eq!(rounding_rshift(5, 1), 3);
        assert_eq!(rounding_rshift(-5, 1), -3);
        assert_eq!(rounding_rshift(-3, 1), -2);
        assert_eq!(rounding_rshift(4, 1), 2);
        assert_eq!(rounding_rshift(i32::MIN, 31), -1);
        assert_eq!(rounding_rshift(i32::MAX, 31), 1);
        for x in [-7, 0, 1, i32::MAX, i32::MIN] {
            assert_eq!(rounding_rshift(x, 0), x);
        }
    }

    #[test]
    fn requantize_frozen_cases() {
        assert_eq!(
            requantize(
                RawAccumulator(100),
                0,
                &params(i32::MAX, 0, 0, 0, -127, 127)
            ),
            100
        );
        assert_eq!(
            requantize(RawAccumulator(0), 0, &params(12345, -3, 0, -5, -128, 127)),
            -5
        );
        assert_eq!(
            requantize(
                RawAccumulator(20000),
                0,
                &params(1 << 30, 0, 0, 0, -127, 127)
            ),
            127
        );
        assert_eq!(
            requantize(
                RawAccumulator(1000),
                0,
                &params(1395864371, -6, 37, 3, -128, 127)
            ),
            14
        );
        assert_eq!(
            requantize(
                RawAccumulator(-777),
                0,
                &params(1518500250, 2, -5, -10, -128, 127)
            ),
            -128
        );
        assert_eq!(
            requantize(
                RawAccumulator(123456),
                0,
                &params(1 << 30, -10, 0, 0, -128, 127)
            ),
            60
        );
    }

    #[test]
    fn extreme_bias_and_shift_saturate() {
        let qp = params(i32::MAX, 31, i32::MAX, 0, -128, 127);
        assert_eq!(requantize(RawAccumulator(i32::MAX), 0, &qp), 127);
        let qp = params(i32::MAX, 31, i32::MIN, 0, -128, 127);
        assert_eq!(requantize(RawAccumulator(i32::MIN), 0, &qp), -128);
    }

    #[test]
    fn quantize_multiplier_reconstructs_scale() {
        for real in [0.5, 0.75, 0.001234, 1.0, 3.7, 1e-6] {
            let (qm, shift) = quantize_multiplier(real);
            let back = qm as f64 / (1u64 << 31) as f64 * 2f64.powi(shift);
            assert!((back - real).abs() <= real * 1e-9, "{real} -> {back}");
            assert!(qm >= 1 << 30);
        }
        assert_eq!(quantize_multiplier(0.0), (0, 0));
    }

    #[test]
    fn json_schema_round_trip() {
        let json = r#"{"zero_point_rhs": -7, "zero_point_out": 3, "clamp": [-100, 100],
                       "channels": [{"qm": 1073741824, "shift": -2, "bias": 17}]}"#;
        let qp = QuantParams::from_json(json).unwrap();
        assert_eq!(qp.zero_point_rhs, -7);
        assert_eq!(qp.clamp_min, -100);
        assert_eq!(qp.channels[0].bias, 17);
        assert_eq!(QuantParams::from_json(&qp.to_json().unwrap()).unwrap(), qp);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad_clamp =
            r#"{"zero_point_rhs": 0, "zero_point_out": 0, "clamp": [5, -5], "channels": []}"#;
        assert!(QuantParams::from_json(bad_clamp).is_err());
        let bad_zp =
            r#"{"zero_point_rhs": 300, "zero_point_out": 0, "clamp": [-5, 5], "channels": []}"#;
        assert!(QuantParams::from_json(bad_zp).is_err());
        let bad_shift = r#"{"zero_point_rhs": 0, "zero_point_out": 0, "clamp": [-5, 5],
                            "channels": [{"qm": 1, "shift": 40, "bias": 0}]}"#;
        assert!(QuantParams::from_json(bad_shift).is_err());
        let bad_qm = r#"{"zero_point_rhs": 0, "zero_point_out": 0, "clamp": [-5, 5],
                         "channels": [{"qm": -1, "shift": 0, "bias": 0}]}"#;
        assert!(QuantParams::from_json(bad_qm).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn srdhm_commutes(a in any::<i32>(), b in any::<i32>()) {
            prop_assert_eq!(srdhm(a, b), srdhm(b, a));
        }

        #[test]
        fn srdhm_by_max_is_near_identity(x in any::<i32>()) {
            prop_assert!((srdhm(x, i32::MAX) as i64 - x as i64).abs() <= 1);
        }

        #[test]
        fn requantize_is_monotone_and_clamped(
            a in -(1i32 << 24)..(1 << 24),
            delta in 0i32..(1 << 20),
            qm in 0i32..=i32::MAX,
            shift in -31i32..=31,
            bias in -(1i32 << 20)..(1 << 20),
            zp in any::<i8>(),
            lo in -128i32..=0,
            hi in 0i32..=127,
        ) {
            let qp = params(qm, shift, bias, zp, lo as i8, hi as i8);
            let r1 = requantize(RawAccumulator(a), 0, &qp);
            let r2 = requantize(RawAccumulator(a + delta), 0, &qp);
            prop_assert!(r1 <= r2);
            prop_assert!((lo as i8..=hi as i8).contains(&r1));
            prop_assert!((lo as i8..=hi as i8).contains(&r2));
        }
    }
}
