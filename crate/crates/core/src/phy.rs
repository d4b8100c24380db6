//! Digital link model for one view's index stream.
//!
//! indices → fixed-width big-endian bits → Gray-mapped symbols → block-flat
//! fading channel `r = h·s + n` → zero-forcing equalization `r / h` →
//! hard-decision bits → indices.
//!
//! Constellations (unit average energy):
//!
//! * QPSK, 2 bits `b0 b1`: I = `+1` if `b0 = 0` else `-1`, Q likewise from
//!   `b1`, both scaled by `1/√2`.
//! * 16-QAM, 4 bits `b0 b1 b2 b3`: I from `b0 b1`, Q from `b2 b3`, each pair
//!   mapped `00 → -3, 01 → -1, 11 → +1, 10 → +3`, scaled by `1/√10`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::quantize::IndexVector;

/// Resource elements per resource block: 12 subcarriers × 14 OFDM symbols.
pub const RES_PER_RB: u32 = 168;
/// Bits per resource block under QPSK.
pub const QPSK_BITS_PER_RB: u32 = RES_PER_RB * 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("index {index} does not fit in {width} bits")]
    IndexTooWide { index: usize, width: u32 },
    #[error("bit width {0} is not in 1..=32")]
    BadWidth(u32),
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("channel gain is exactly zero; frame undecodable")]
    Undecodable,
    #[error("invalid channel configuration: {0}")]
    BadChannel(&'static str),
}

/// An ordered bit string, one `bool` per bit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Parses a string of `'0'`/`'1'`, ignoring whitespace and `_`.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    /// Number of positions where `self` and `other` differ (over the shorter length).
    pub fn hamming(&self, other: &BitSequence) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

fn check_width(width: u32) -> Result<(), PhyError> {
    if (1..=32).contains(&width) {
        Ok(())
    } else {
        Err(PhyError::BadWidth(width))
    }
}

/// Serializes indices as fixed-width big-endian fields, in sub-vector order.
pub fn indices_to_bits(c: &IndexVector, width: u32) -> Result<BitSequence, PhyError> {
    check_width(width)?;
    let mut bits = Vec::with_capacity(c.len() * width as usize);
    for &index in c.indices() {
        if (index as u64) >> width != 0 {
            return Err(PhyError::IndexTooWide { index, width });
        }
        for shift in (0..width).rev() {
            bits.push((index >> shift) & 1 == 1);
        }
    }
    Ok(BitSequence(bits))
}

/// Inverse of [`indices_to_bits`]; the result addresses a `2^width` codebook.
pub fn bits_to_indices(
    bits: &BitSequence,
    width: u32,
    count: usize,
) -> Result<IndexVector, PhyError> {
    check_width(width)?;
    let expected = count * width as usize;
    if bits.len() != expected {
        return Err(PhyError::LengthMismatch {
            expected,
            actual: bits.len(),
        });
    }
    let indices = bits
        .0
        .chunks_exact(width as usize)
        .map(|field| {
            field
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
        })
        .collect();
    Ok(IndexVector::new(indices, 1usize << width).expect("fixed-width fields are always in range"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    /// Bits per resource block: `RES_PER_RB · bits_per_symbol`.
    pub fn bits_per_rb(self) -> u32 {
        RES_PER_RB * self.bits_per_symbol()
    }
}

/// Complex baseband symbols of unit average energy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    /// Zero bits appended to fill the last symbol.
    pub padding: usize,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

fn pad_bits(bits: &BitSequence, per_symbol: usize) -> (Vec<bool>, usize) {
    let mut padded = bits.0.clone();
    let padding = (per_symbol - padded.len() % per_symbol) % per_symbol;
    padded.resize(padded.len() + padding, false);
    (padded, padding)
}

pub fn modulate_qpsk(bits: &BitSequence) -> SymbolFrame {
    let a = core::f64::consts::FRAC_1_SQRT_2;
    let (padded, padding) = pad_bits(bits, 2);
    let symbols = padded
        .chunks_exact(2)
        .map(|p| Complex64::new(if p[0] { -a } else { a }, if p[1] { -a } else { a }))
        .collect();
    SymbolFrame { symbols, padding }
}

/// Hard decision by quadrant; an exact zero component decides bit 0.
pub fn demodulate_qpsk(frame: &SymbolFrame) -> BitSequence {
    let mut bits = Vec::with_capacity(frame.len() * 2);
    for s in &frame.symbols {
        bits.push(s.re < 0.0);
        bits.push(s.im < 0.0);
    }
    BitSequence(bits)
}

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

fn qam16_level(b0: bool, b1: bool) -> f64 {
    match (b0, b1) {
        (false, false) => -3.0,
        (false, true) => -1.0,
        (true, true) => 1.0,
        (true, false) => 3.0,
    }
}

fn qam16_decide(x: f64) -> (bool, bool) {
    let t = 2.0 * QAM16_SCALE;
    if x > t {
        (true, false)
    } else if x > 0.0 {
        (true, true)
    } else if x > -t {
        (false, true)
    } else {
        (false, false)
    }
}

pub fn modulate_16qam(bits: &BitSequence) -> SymbolFrame {
    let (padded, padding) = pad_bits(bits, 4);
    let symbols = padded
        .chunks_exact(4)
        .map(|q| {
            Complex64::new(
                qam16_level(q[0], q[1]) * QAM16_SCALE,
                qam16_level(q[2], q[3]) * QAM16_SCALE,
            )
        })
        .collect();
    SymbolFrame { symbols, padding }
}

pub fn demodulate_16qam(frame: &SymbolFrame) -> BitSequence {
    let mut bits = Vec::with_capacity(frame.len() * 4);
    for s in &frame.symbols {
        let (b0, b1) = qam16_decide(s.re);
        let (b2, b3) = qam16_decide(s.im);
        bits.extend_from_slice(&[b0, b1, b2, b3]);
    }
    BitSequence(bits)
}

pub fn modulate(bits: &BitSequence, modulation: Modulation) -> SymbolFrame {
    match modulation {
        Modulation::Qpsk => modulate_qpsk(bits),
        Modulation::Qam16 => modulate_16qam(bits),
    }
}

/// Demodulates and strips the padding recorded in `frame`.
pub fn demodulate(frame: &SymbolFrame, modulation: Modulation) -> BitSequence {
    let mut bits = match modulation {
        Modulation::Qpsk => demodulate_qpsk(frame),
        Modulation::Qam16 => demodulate_16qam(frame),
    };
    let keep = bits.len() - frame.padding.min(bits.len());
    bits.truncate(keep);
    bits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fading {
    #[default]
    Rayleigh,
    /// `h = 1` for every frame.
    Awgn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Variance(f64),
    /// Average received SNR per symbol, `σ_h²·E|s|² / σ_n²` with `E|s|² = 1`.
    SnrDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub fading: Fading,
    pub channel_variance: f64,
    pub noise: NoiseLevel,
}

impl ChannelConfig {
    pub fn rayleigh_snr_db(snr_db: f64) -> Self {
        Self {
            fading: Fading::Rayleigh,
            channel_variance: 1.0,
            noise: NoiseLevel::SnrDb(snr_db),
        }
    }

    pub fn awgn_snr_db(snr_db: f64) -> Self {
        Self {
            fading: Fading::Awgn,
            channel_variance: 1.0,
            noise: NoiseLevel::SnrDb(snr_db),
        }
    }

    pub fn noiseless(fading: Fading) -> Self {
        Self {
            fading,
            channel_variance: 1.0,
            noise: NoiseLevel::Variance(0.0),
        }
    }

    /// Sets the noise so that the average SNR per bit is `ebn0_db` for a
    /// constellation carrying `bits_per_symbol` bits.
    pub fn with_ebn0_db(fading: Fading, ebn0_db: f64, bits_per_symbol: u32) -> Self {
        let es_n0_db = ebn0_db + 10.0 * libm::log10(f64::from(bits_per_symbol));
        Self {
            fading,
            channel_variance: 1.0,
            noise: NoiseLevel::SnrDb(es_n0_db),
        }
    }

    fn gain_variance(&self) -> f64 {
        match self.fading {
            Fading::Rayleigh => self.channel_variance,
            Fading::Awgn => 1.0,
        }
    }

    /// Noise variance `σ_n²`; zero means a noiseless link.
    pub fn noise_variance(&self) -> f64 {
        match self.noise {
            NoiseLevel::Variance(v) => v,
            NoiseLevel::SnrDb(db) => self.gain_variance() * libm::pow(10.0, -db / 10.0),
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if !(self.channel_variance.is_finite() && self.channel_variance > 0.0) {
            return Err(PhyError::BadChannel(
                "channel variance must be finite and positive",
            ));
        }
        let nv = self.noise_variance();
        if !(nv.is_finite() && nv >= 0.0) {
            return Err(PhyError::BadChannel(
                "noise variance must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Received symbols together with the (receiver-known) channel gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub received: Vec<Complex64>,
    pub gain: Complex64,
    pub padding: usize,
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn sample_cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = libm::sqrt(variance / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Passes a frame through a block-flat channel: one gain draw per frame,
/// independent noise per symbol.
pub fn apply_channel<R: Rng + ?Sized>(
    frame: &SymbolFrame,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<ReceivedFrame, PhyError> {
    cfg.validate()?;
    let gain = match cfg.fading {
        Fading::Rayleigh => sample_cscg(rng, cfg.channel_variance),
        Fading::Awgn => Complex64::new(1.0, 0.0),
    };
    let nv = cfg.noise_variance();
    let received = frame
        .symbols
        .iter()
        .map(|&s| {
            let hs = gain * s;
            if nv > 0.0 {
                hs + sample_cscg(rng, nv)
            } else {
                hs
            }
        })
        .collect();
    Ok(ReceivedFrame {
        received,
        gain,
        padding: frame.padding,
    })
}

/// Zero-forcing equalization by the known gain.
pub fn equalize(r: &ReceivedFrame) -> Result<SymbolFrame, PhyError> {
    if r.gain.re == 0.0 && r.gain.im == 0.0 {
        return Err(PhyError::Undecodable);
    }
    let symbols = r.received.iter().map(|&y| y / r.gain).collect();
    Ok(SymbolFrame {
        symbols,
        padding: r.padding,
    })
}

/// Resource blocks needed for `num_subvectors · bits_per_index` bits.
pub fn rb_cost(num_subvectors: u32, bits_per_index: u32, bits_per_rb: u32) -> u32 {
    let bits = u64::from(num_subvectors) * u64::from(bits_per_index);
    bits.div_ceil(u64::from(bits_per_rb)) as u32
}

/// Outcome of sending one index vector over the link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub recovered: IndexVector,
    pub bit_errors: usize,
    pub bits_sent: usize,
    pub gain: Complex64,
    pub undecodable: bool,
}

/// Runs the full chain for one view. An undecodable frame resolves every
/// bit to 0.
pub fn transmit_indices<R: Rng + ?Sized>(
    c: &IndexVector,
    width: u32,
    modulation: Modulation,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<LinkOutcome, PhyError> {
    let bits = indices_to_bits(c, width)?;
    let frame = modulate(&bits, modulation);
    let received = apply_channel(&frame, cfg, rng)?;
    let (rx_bits, undecodable) = match equalize(&received) {
        Ok(eq) => (demodulate(&eq, modulation), false),
        Err(PhyError::Undecodable) => (BitSequence(alloc::vec![false; bits.len()]), true),
        Err(e) => return Err(e),
    };
    let recovered = bits_to_indices(&rx_bits, width, c.len())?;
    Ok(LinkOutcome {
        bit_errors: bits.hamming(&rx_bits),
        bits_sent: bits.len(),
        recovered,
        gain: received.gain,
        undecodable,
    })
}
