//! ASCII command frames for the Fotokite ground station, plus the transport
//! contract and a loopback mock.
//!
//! A frame is `Yaw <rate>` or `Pitch <rate>` followed by a line feed, the
//! rate in rad/s written with the fewest digits that represent it at two
//! decimal places (`0.3`, `-0.3`, `0.25`). Idle commands produce no traffic.

use std::fmt;

use thiserror::Error;

use crate::controller::{GimbalCommand, HARDWARE_RATE_CAP};
use crate::scalar::Scalar;

pub const BAUD_RATE: u32 = 9600;
/// 8N1: start bit, eight data bits, stop bit.
pub const BITS_PER_BYTE: u32 = 10;
pub const TERMINATOR: u8 = b'\n';
/// Default keep-alive re-send interval for an unchanged nonzero command.
pub const DEFAULT_KEEPALIVE_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("command drives both axes (yaw {yaw}, pitch {pitch}); a frame carries one axis")]
    NotSingleAxis { yaw: f64, pitch: f64 },
    #[error("rate {0} rad/s is not representable with two decimals")]
    Unrepresentable(f64),
    #[error("rate {0} rad/s outside [-{HARDWARE_RATE_CAP}, {HARDWARE_RATE_CAP}]")]
    OutOfRange(f64),
    #[error("unknown axis word {0:?}")]
    UnknownAxis(String),
    #[error("non-numeric rate payload {0:?}")]
    NonNumeric(String),
    #[error("malformed frame {0:?}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Yaw,
    Pitch,
}

impl Axis {
    fn word(self) -> &'static str {
        match self {
            Axis::Yaw => "Yaw",
            Axis::Pitch => "Pitch",
        }
    }
}

/// One command line, stored without its terminator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SerialFrame {
    text: String,
}

impl SerialFrame {
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Bytes on the wire, terminator included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.text.len() + 1);
        b.extend_from_slice(self.text.as_bytes());
        b.push(TERMINATOR);
        b
    }

    pub fn wire_len(&self) -> usize {
        self.text.len() + 1
    }

    /// Parses and validates a frame body; a single trailing line feed is accepted.
    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        let body = line.strip_suffix('\n').unwrap_or(line);
        decode_parts(body)?;
        Ok(Self {
            text: body.to_owned(),
        })
    }
}

impl fmt::Display for SerialFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Rate in hundredths of rad/s.
fn to_centi(rate: f64) -> Result<i64, ProtocolError> {
    let scaled = rate * 100.0;
    let centi = scaled.round();
    if (scaled - centi).abs() > 1e-6 || !rate.is_finite() {
        return Err(ProtocolError::Unrepresentable(rate));
    }
    let cap = (HARDWARE_RATE_CAP * 100.0).round();
    if centi.abs() > cap {
        return Err(ProtocolError::OutOfRange(rate));
    }
    Ok(centi as i64)
}

fn format_centi(centi: i64) -> String {
    let sign = if centi < 0 { "-" } else { "" };
    let m = centi.unsigned_abs();
    let (int, frac) = (m / 100, m % 100);
    if frac % 10 == 0 {
        format!("{sign}{int}.{}", frac / 10)
    } else {
        format!("{sign}{int}.{frac:02}")
    }
}

fn frame_for(axis: Axis, rate: f64) -> Result<SerialFrame, ProtocolError> {
    let centi = to_centi(rate)?;
    if centi == 0 {
        return Err(ProtocolError::Unrepresentable(rate));
    }
    Ok(SerialFrame {
        text: format!("{} {}", axis.word(), format_centi(centi)),
    })
}

/// Encodes a command as zero or one frames.
pub fn encode<T: Scalar>(cmd: &GimbalCommand<T>) -> Result<Vec<SerialFrame>, ProtocolError> {
    let yaw = cmd.yaw_rate.as_f64();
    let pitch = cmd.pitch_rate.as_f64();
    match (yaw != 0.0, pitch != 0.0) {
        (false, false) => Ok(Vec::new()),
        (true, false) => Ok(vec![frame_for(Axis::Yaw, yaw)?]),
        (false, true) => Ok(vec![frame_for(Axis::Pitch, pitch)?]),
        (true, true) => Err(ProtocolError::NotSingleAxis { yaw, pitch }),
    }
}

fn decode_parts(body: &str) -> Result<(Axis, f64), ProtocolError> {
    let mut parts = body.split(' ');
    let (Some(word), Some(payload), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(ProtocolError::Malformed(body.to_owned()));
    };
    let axis = match word {
        "Yaw" => Axis::Yaw,
        "Pitch" => Axis::Pitch,
        other => return Err(ProtocolError::UnknownAxis(other.to_owned())),
    };
    let is_numeric = !payload.is_empty()
        && payload
            .strip_prefix('-')
            .unwrap_or(payload)
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.');
    let value: f64 = match payload.parse() {
        Ok(v) if is_numeric => v,
        _ => return Err(ProtocolError::NonNumeric(payload.to_owned())),
    };
    let centi = to_centi(value).map_err(|e| match e {
        ProtocolError::Unrepresentable(_) => ProtocolError::Malformed(body.to_owned()),
        other => other,
    })?;
    // Only the canonical spelling of a nonzero rate is a valid frame.
    if centi == 0 || format_centi(centi) != payload {
        return Err(ProtocolError::Malformed(body.to_owned()));
    }
    Ok((axis, centi as f64 / 100.0))
}

pub fn decode(frame: &SerialFrame) -> GimbalCommand<f64> {
    let (axis, rate) = decode_parts(&frame.text).expect("SerialFrame holds a validated body");
    match axis {
        Axis::Yaw => GimbalCommand::yaw(rate),
        Axis::Pitch => GimbalCommand::pitch(rate),
    }
}

/// Parses raw frame text straight to a command.
pub fn decode_str(line: &str) -> Result<GimbalCommand<f64>, ProtocolError> {
    SerialFrame::parse(line).map(|f| decode(&f))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error(
        "transmit buffer full: {queued} bytes queued, frame needs {needed}, capacity {capacity}"
    )]
    Backpressure {
        queued: usize,
        needed: usize,
        capacity: usize,
    },
    #[error("send time {t} s precedes previous send at {last} s")]
    TimeWentBackwards { t: f64, last: f64 },
}

/// Byte sink for frames. Implementations either accept a frame whole or
/// return an error; they never drop frames.
pub trait Transport {
    fn send(&mut self, frame: &SerialFrame, t: f64) -> Result<(), TransportError>;
}

/// Line throughput in bytes per second for a baud rate and framing.
pub fn line_bytes_per_second(baud: u32, bits_per_byte: u32) -> f64 {
    baud as f64 / bits_per_byte as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedFrame {
    pub t: f64,
    pub text: String,
}

/// Loopback transport modelling a UART transmit buffer that drains at the
/// line rate. Every accepted frame is logged with its send time.
#[derive(Debug, Clone)]
pub struct MockTransport {
    bytes_per_s: f64,
    capacity: usize,
    queued: f64,
    last_t: Option<f64>,
    log: Vec<LoggedFrame>,
}

impl MockTransport {
    pub fn new(baud: u32, capacity: usize) -> Self {
        Self {
            bytes_per_s: line_bytes_per_second(baud, BITS_PER_BYTE),
            capacity,
            queued: 0.0,
            last_t: None,
            log: Vec::new(),
        }
    }

    pub fn log(&self) -> &[LoggedFrame] {
        &self.log
    }

    pub fn total_bytes(&self) -> usize {
        self.log.iter().map(|f| f.text.len() + 1).sum()
    }

    /// Bytes still waiting in the transmit buffer at time `t`.
    pub fn queued_at(&self, t: f64) -> f64 {
        let elapsed = self.last_t.map_or(0.0, |l| (t - l).max(0.0));
        (self.queued - elapsed * self.bytes_per_s).max(0.0)
    }
}

impl Default for MockTransport {
    /// 9600 baud with a 64-byte transmit buffer.
    fn default() -> Self {
        Self::new(BAUD_RATE, 64)
    }
}

impl Transport for MockTransport {
    fn send(&mut self, frame: &SerialFrame, t: f64) -> Result<(), TransportError> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(TransportError::TimeWentBackwards { t, last });
            }
        }
        let queued = self.queued_at(t);
        let needed = frame.wire_len();
        if queued + needed as f64 > self.capacity as f64 {
            return Err(TransportError::Backpressure {
                queued: queued.ceil() as usize,
                needed,
                capacity: self.capacity,
            });
        }
        self.queued = queued + needed as f64;
        self.last_t = Some(t);
        self.log.push(LoggedFrame {
            t,
            text: frame.text.clone(),
        });
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Send-on-change front end for a transport. Repeated identical commands are
/// suppressed except for a periodic keep-alive; idle commands send nothing.
#[derive(Debug)]
pub struct CommandLink<W> {
    transport: W,
    keepalive_s: Option<f64>,
    last: Option<GimbalCommand<f64>>,
    last_sent_t: f64,
}

impl<W: Transport> CommandLink<W> {
    pub fn new(transport: W, keepalive_s: Option<f64>) -> Self {
        Self {
            transport,
            keepalive_s,
            last: None,
            last_sent_t: f64::NEG_INFINITY,
        }
    }

    /// Submits the command generated at time `t` and returns how many frames
    /// went out. On error nothing is recorded, so the caller may retry.
    pub fn submit<T: Scalar>(
        &mut self,
        cmd: &GimbalCommand<T>,
        t: f64,
    ) -> Result<usize, LinkError> {
        let cmd = GimbalCommand::new(cmd.yaw_rate.as_f64(), cmd.pitch_rate.as_f64());
        let frames = encode(&cmd)?;
        let changed = self.last != Some(cmd);
        let stale = self
            .keepalive_s
            .is_some_and(|k| t - self.last_sent_t >= k - 1e-9);
        if frames.is_empty() || !(changed || stale) {
            self.last = Some(cmd);
            return Ok(0);
        }
        for f in &frames {
            self.transport.send(f, t)?;
        }
        self.last = Some(cmd);
        self.last_sent_t = t;
        Ok(frames.len())
    }

    pub fn transport(&self) -> &W {
        &self.transport
    }

    pub fn into_transport(self) -> W {
        self.transport
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;

    fn texts(frames: &[SerialFrame]) -> Vec<&str> {
        frames.iter().map(|f| f.text()).collect()
    }

    #[test]
    fn encode_examples() {
        let f = encode(&GimbalCommand::yaw(0.2)).unwrap();
        assert_eq!(texts(&f), ["Yaw 0.2"]);
        assert_eq!(f[0].to_bytes(), b"Yaw 0.2\n");
        assert!(encode(&GimbalCommand::<f64>::idle()).unwrap().is_empty());
        assert_eq!(
            texts(&encode(&GimbalCommand::yaw(-0.3)).unwrap()),
            ["Yaw -0.3"]
        );
        assert_eq!(
            texts(&encode(&GimbalCommand::pitch(0.25)).unwrap()),
            ["Pitch 0.25"]
        );
        assert_eq!(
            texts(&encode(&GimbalCommand::pitch(-0.05f32)).unwrap()),
            ["Pitch -0.05"]
        );
    }

    #[test]
    fn encode_rejections() {
        assert!(matches!(
            encode(&GimbalCommand::new(0.3, 0.3)),
            Err(ProtocolError::NotSingleAxis { .. })
        ));
        assert!(matches!(
            encode(&GimbalCommand::yaw(0.4)),
            Err(ProtocolError::OutOfRange(_))
        ));
        assert!(matches!(
            encode(&GimbalCommand::yaw(0.125)),
            Err(ProtocolError::Unrepresentable(_))
        ));
        assert!(matches!(
            encode(&GimbalCommand::yaw(0.001)),
            Err(ProtocolError::Unrepresentable(_))
        ));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_str("Yaw 0.3").unwrap(), GimbalCommand::yaw(0.3));
        assert_eq!(
            decode_str("Pitch -0.3").unwrap(),
            GimbalCommand::pitch(-0.3)
        );
        assert_eq!(
            decode_str("Pitch -0.3\n").unwrap(),
            GimbalCommand::pitch(-0.3)
        );
    }

    #[test]
    fn decode_errors_are_distinct() {
        assert!(
            matches!(decode_str("Roll 0.3"), Err(ProtocolError::UnknownAxis(w)) if w == "Roll")
        );
        assert!(matches!(
            decode_str("yaw 0.3"),
            Err(ProtocolError::UnknownAxis(_))
        ));
        assert!(matches!(
            decode_str("Yaw 0.4"),
            Err(ProtocolError::OutOfRange(_))
        ));
        assert!(matches!(
            decode_str("Yaw -1.0"),
            Err(ProtocolError::OutOfRange(_))
        ));
        assert!(matches!(
            decode_str("Yaw abc"),
            Err(ProtocolError::NonNumeric(_))
        ));
        assert!(matches!(
            decode_str("Yaw 1e-1"),
            Err(ProtocolError::NonNumeric(_))
        ));
        assert!(matches!(
            decode_str("Yaw +0.3"),
            Err(ProtocolError::NonNumeric(_))
        ));
        assert!(matches!(
            decode_str("Yaw  0.3"),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_str("Yaw"),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_str("Yaw 0.30"),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_str("Yaw .3"),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_str("Yaw 0.0"),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_str("Yaw 0.125"),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn round_trip_over_the_five_commands() {
        for cmd in [
            GimbalCommand::idle(),
            GimbalCommand::yaw(0.3),
            GimbalCommand::yaw(-0.3),
            GimbalCommand::pitch(0.3),
            GimbalCommand::pitch(-0.3),
        ] {
            let frames = encode(&cmd).unwrap();
            let back = frames.first().map_or(GimbalCommand::idle(), decode);
            assert_eq!(back, cmd);
        }
    }

    #[test]
    fn fuzzed_valid_frames_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..10_000 {
            let mut centi = 0;
            while centi == 0 {
                centi = rng.gen_range(-30i64..=30);
            }
            let axis = if rng.gen_bool(0.5) { "Yaw" } else { "Pitch" };
            // Independent spelling: trim trailing zeros of a two-decimal rendering.
            let mut num = format!("{:.2}", centi as f64 / 100.0);
            if num.ends_with('0') {
                num.pop();
            }
            let text = format!("{axis} {num}");
            let cmd = decode_str(&text).unwrap();
            let frames = encode(&cmd).unwrap();
            assert_eq!(texts(&frames), [text.as_str()]);
        }
    }

    #[test]
    fn mock_applies_backpressure_at_line_rate() {
        let mut t = MockTransport::new(BAUD_RATE, 16);
        let f = SerialFrame::parse("Pitch -0.3").unwrap();
        assert_eq!(f.wire_len(), 11);
        t.send(&f, 0.0).unwrap();
        let err = t.send(&f, 0.0).unwrap_err();
        assert!(matches!(
            err,
            TransportError::Backpressure { needed: 11, .. }
        ));
        // 6 bytes drain in 6/960 s.
        t.send(&f, 6.0 / 960.0 + 1e-9).unwrap();
        assert_eq!(t.log().len(), 2);
        assert!(t.send(&f, 0.0).is_err());
    }

    #[test]
    fn link_sends_on_change_only() {
        let mut link = CommandLink::new(MockTransport::default(), None);
        let dt = 1.0 / 30.0;
        let cmds = [
            GimbalCommand::idle(),
            GimbalCommand::yaw(0.3),
            GimbalCommand::yaw(0.3),
            GimbalCommand::idle(),
            GimbalCommand::yaw(0.3),
            GimbalCommand::pitch(-0.3),
            GimbalCommand::pitch(-0.3),
        ];
        let sent: Vec<usize> = cmds
            .iter()
            .enumerate()
            .map(|(i, c)| link.submit(c, i as f64 * dt).unwrap())
            .collect();
        assert_eq!(sent, [0, 1, 0, 0, 1, 1, 0]);
        let log: Vec<_> = link
            .transport()
            .log()
            .iter()
            .map(|f| f.text.as_str())
            .collect();
        assert_eq!(log, ["Yaw 0.3", "Yaw 0.3", "Pitch -0.3"]);
    }

    #[test]
    fn link_keepalive_resends() {
        let mut link = CommandLink::new(MockTransport::default(), Some(1.0));
        let dt = 1.0 / 30.0;
        let mut total = 0;
        for i in 0..=75 {
            total += link
                .submit(&GimbalCommand::yaw(0.3), i as f64 * dt)
                .unwrap();
        }
        // Sent at t = 0, 1 and 2 s.
        assert_eq!(total, 3);
    }

    #[test]
    fn idle_link_is_silent() {
        let mut link = CommandLink::new(MockTransport::default(), Some(1.0));
        for i in 0..300 {
            link.submit(&GimbalCommand::<f64>::idle(), i as f64 / 30.0)
                .unwrap();
        }
        assert_eq!(link.transport().total_bytes(), 0);
    }

    #[test]
    fn thirty_hz_budget() {
        // Worst case: an 11-byte frame every frame at 30 Hz.
        let rate = 30.0 * 11.0;
        assert!(rate < line_bytes_per_second(BAUD_RATE, BITS_PER_BYTE));
        assert_eq!(line_bytes_per_second(BAUD_RATE, BITS_PER_BYTE), 960.0);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(centi in -30i64..=30, yaw in any::<bool>()) {
            let rate = centi as f64 / 100.0;
            let cmd = if yaw { GimbalCommand::yaw(rate) } else { GimbalCommand::pitch(rate) };
            let frames = encode(&cmd).unwrap();
            prop_assert_eq!(frames.len(), usize::from(centi != 0));
            let back = frames.first().map_or(GimbalCommand::idle(), decode);
            prop_assert_eq!(back, cmd);
        }
    }
}
