//! Little-endian frame protocol for an out-of-process controller.
//!
//! Frame layout: magic `u32` ("ESCH"), version `u16`, kind `u16`, cycle `u64`,
//! payload count `u16`, then `count` `f64` values. A SyncA frame carries the
//! sampled inputs; the reply SyncB carries `(duty, phase)` per gate followed
//! by one carrier period (0 keeps the template periods).

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{Controller, ControllerInput, PwmConfig};
use crate::{Error, Result};

pub const MAGIC: u32 = 0x4553_4348;
pub const VERSION: u16 = 1;
pub const KIND_SYNC_A: u16 = 1;
pub const KIND_SYNC_B: u16 = 2;

const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub version: u16,
    pub kind: u16,
    pub cycle: u64,
    pub payload: Vec<f64>,
}

impl Frame {
    pub fn new(kind: u16, cycle: u64, payload: Vec<f64>) -> Self {
        Self {
            version: VERSION,
            kind,
            cycle,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.payload.len());
        out.extend_from_slice(&MAGIC.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.kind.to_le_bytes());
        out.extend_from_slice(&self.cycle.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Reads one frame. `Ok(None)` on a clean end of stream before any byte.
    pub fn read_from(r: &mut impl Read) -> io::Result<Option<Frame>> {
        let mut head = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            match r.read(&mut head[filled..])? {
                0 if filled == 0 => return Ok(None),
                0 => return Err(io::ErrorKind::UnexpectedEof.into()),
                n => filled += n,
            }
        }
        let magic = u32::from_le_bytes(head[0..4].try_into().unwrap());
        if magic != MAGIC {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("bad magic {magic:#010x}"),
            ));
        }
        let version = u16::from_le_bytes(head[4..6].try_into().unwrap());
        let kind = u16::from_le_bytes(head[6..8].try_into().unwrap());
        let cycle = u64::from_le_bytes(head[8..16].try_into().unwrap());
        let count = u16::from_le_bytes(head[16..18].try_into().unwrap()) as usize;
        let mut body = vec![0u8; 8 * count];
        r.read_exact(&mut body)?;
        let payload = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some(Frame {
            version,
            kind,
            cycle,
            payload,
        }))
    }
}

/// Controller proxy speaking the frame protocol over TCP.
#[derive(Debug)]
pub struct ExternalController {
    stream: TcpStream,
    template: PwmConfig,
}

impl ExternalController {
    pub fn connect(addr: impl ToSocketAddrs, template: PwmConfig) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, template })
    }

    fn decode_reply(&self, cycle: u64, frame: Frame) -> Result<PwmConfig> {
        let bad = |detail: String| Error::Wire { cycle, detail };
        if frame.version != VERSION {
            return Err(bad(format!(
                "protocol version mismatch: peer sent {}, expected {VERSION}",
                frame.version
            )));
        }
        if frame.kind != KIND_SYNC_B {
            return Err(bad(format!(
                "malformed frame: expected SyncB, got kind {}",
                frame.kind
            )));
        }
        if frame.cycle != cycle {
            return Err(bad(format!("malformed frame: reply for cycle {}", frame.cycle)));
        }
        let n = self.template.gates.len();
        if frame.payload.len() != 2 * n + 1 {
            return Err(bad(format!(
                "malformed frame: {} values, expected {}",
                frame.payload.len(),
                2 * n + 1
            )));
        }
        let mut cmd = self.template.clone();
        let period = frame.payload[2 * n];
        if !(period >= 0.0 && period.is_finite()) {
            return Err(bad(format!("malformed frame: carrier period {period}")));
        }
        for (g, gate) in cmd.gates.iter_mut().enumerate() {
            let (duty, phase) = (frame.payload[2 * g], frame.payload[2 * g + 1]);
            if !(0.0..=1.0).contains(&duty) {
                return Err(bad(format!(
                    "malformed frame: gate {g} duty {duty} outside [0, 1]"
                )));
            }
            if !(0.0..1.0).contains(&phase) {
                return Err(bad(format!(
                    "malformed frame: gate {g} phase {phase} outside [0, 1)"
                )));
            }
            gate.duty = duty;
            gate.phase = phase;
            if period > 0.0 {
                gate.period = period;
            }
        }
        cmd.validate().map_err(|e| bad(format!("malformed frame: {e}")))?;
        Ok(cmd)
    }
}

impl Controller for ExternalController {
    fn startup(&mut self) -> Result<PwmConfig> {
        Ok(self.template.clone())
    }

    fn step(&mut self, input: &ControllerInput<'_>) -> Result<PwmConfig> {
        let cycle = input.cycle;
        let lost = |e: io::Error| Error::Wire {
            cycle,
            detail: format!("connection lost: {e}"),
        };
        let frame = Frame::new(KIND_SYNC_A, cycle, input.samples.to_vec());
        self.stream.write_all(&frame.encode()).map_err(lost)?;
        let reply = Frame::read_from(&mut self.stream)
            .map_err(lost)?
            .ok_or_else(|| lost(io::ErrorKind::UnexpectedEof.into()))?;
        self.decode_reply(cycle, reply)
    }
}

/// Serves the protocol on a loopback port, answering each SyncA with the
/// bytes returned by `handler`. Each connection gets its own thread.
pub fn spawn_raw_peer<F>(handler: F, delay: Duration) -> io::Result<SocketAddr>
where
    F: Fn(&Frame) -> Vec<u8> + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut conn) = conn else { break };
            let handler = Arc::clone(&handler);
            thread::spawn(move || {
                let _ = conn.set_nodelay(true);
                while let Ok(Some(frame)) = Frame::read_from(&mut conn) {
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    if conn.write_all(&handler(&frame)).is_err() {
                        break;
                    }
                }
            });
        }
    });
    Ok(addr)
}

/// Peer replying to every cycle with a fixed SyncB payload.
pub fn spawn_fixed_peer(payload: Vec<f64>, delay: Duration) -> io::Result<SocketAddr> {
    spawn_raw_peer(
        move |f| Frame::new(KIND_SYNC_B, f.cycle, payload.clone()).encode(),
        delay,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{Carrier, GatePwm};

    fn template() -> PwmConfig {
        PwmConfig {
            gates: vec![GatePwm {
                carrier: Carrier::Sawtooth,
                period: 25e-6,
                duty: 0.1,
                phase: 0.0,
                inverted: false,
            }],
            pairs: vec![],
        }
    }

    #[test]
    fn frame_round_trip() {
        let f = Frame::new(KIND_SYNC_A, 42, vec![1.5, -2.0]);
        let bytes = f.encode();
        assert_eq!(&bytes[0..4], &MAGIC.to_le_bytes());
        assert_eq!(bytes.len(), 18 + 16);
        let back = Frame::read_from(&mut bytes.as_slice()).unwrap().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn fixed_peer_sets_duty() {
        let addr = spawn_fixed_peer(vec![0.5, 0.0, 0.0], Duration::ZERO).unwrap();
        let mut c = ExternalController::connect(addr, template()).unwrap();
        let cmd = c
            .step(&ControllerInput {
                cycle: 3,
                t: 0.0,
                samples: &[1.0],
            })
            .unwrap();
        assert_eq!(cmd.gates[0].duty, 0.5);
        assert_eq!(cmd.gates[0].period, 25e-6);
    }

    #[test]
    fn rejects_bad_duty_and_version() {
        let addr = spawn_fixed_peer(vec![1.5, 0.0, 0.0], Duration::ZERO).unwrap();
        let mut c = ExternalController::connect(addr, template()).unwrap();
        let err = c
            .step(&ControllerInput {
                cycle: 7,
                t: 0.0,
                samples: &[],
            })
            .unwrap_err();
        assert!(
            matches!(&err, Error::Wire { cycle: 7, detail } if detail.contains("malformed")),
            "{err}"
        );

        let addr = spawn_raw_peer(
            |f| {
                let mut r = Frame::new(KIND_SYNC_B, f.cycle, vec![0.5, 0.0, 0.0]);
                r.version = 9;
                r.encode()
            },
            Duration::ZERO,
        )
        .unwrap();
        let mut c = ExternalController::connect(addr, template()).unwrap();
        let err = c
            .step(&ControllerInput {
                cycle: 2,
                t: 0.0,
                samples: &[],
            })
            .unwrap_err();
        assert!(err.to_string().contains("version mismatch"), "{err}");
    }
}
