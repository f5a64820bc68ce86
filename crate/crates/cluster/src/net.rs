//! Length-prefixed framing over TCP and the two servers built on it.
//!
//! Frame: `len: u32 LE | kind: u8 | body`, where `len` counts kind and body.
//! Bodies are canonical JSON.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use sxgb_protocol::{EnrollmentMessage, Seqn, SignedCommand, SignedResponse};

use crate::attest::AttestationReport;
use crate::endpoint::Endpoint;
use crate::error::{ClusterError, Result};
use crate::master::MasterService;
use crate::orchestrator::{Orchestrator, Reply};
use crate::storage::Storage;

pub const MAX_FRAME: usize = 64 << 20;

pub mod kind {
    pub const ATTEST: u8 = 1;
    pub const ENROLL: u8 = 2;
    pub const SUBMIT_COMMAND: u8 = 3;
    pub const FETCH_RESPONSE: u8 = 4;
    pub const RELAY: u8 = 5;
    pub const OK: u8 = 0x80;
    pub const ERR: u8 = 0x81;
    pub const PENDING: u8 = 0x82;
}

pub fn write_frame(w: &mut impl Write, kind: u8, body: &[u8]) -> std::io::Result<()> {
    w.write_all(&((body.len() + 1) as u32).to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(body)?;
    w.flush()
}

/// `Ok(None)` when the peer closed the connection between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<(u8, Vec<u8>)>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        other => other?,
    }
    let len = u32::from_le_bytes(len) as usize;
    if len == 0 || len > MAX_FRAME {
        return Err(ClusterError::Transport(format!("bad frame length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let body = buf.split_off(1);
    Ok(Some((buf[0], body)))
}

fn to_bytes(v: &Value) -> Vec<u8> {
    serde_json::to_vec(v).expect("json values always serialize")
}

fn parse(b: &[u8]) -> Result<Value> {
    serde_json::from_slice(b).map_err(|e| ClusterError::Transport(e.to_string()))
}

/// One request, one reply.
fn call(stream: &mut TcpStream, kind: u8, body: &[u8]) -> Result<(u8, Vec<u8>)> {
    write_frame(stream, kind, body)?;
    read_frame(stream)?.ok_or_else(|| ClusterError::Transport("connection closed".into()))
}

fn expect_ok((k, body): (u8, Vec<u8>)) -> Result<Vec<u8>> {
    match k {
        kind::OK => Ok(body),
        kind::ERR => Err(ClusterError::Transport(String::from_utf8_lossy(&body).into_owned())),
        k => Err(ClusterError::Transport(format!("unexpected reply kind {k:#x}"))),
    }
}

fn serve<T: Send + 'static>(
    listener: TcpListener,
    state: Arc<Mutex<T>>,
    handle: fn(&Mutex<T>, u8, &[u8]) -> (u8, Vec<u8>),
) -> Result<()> {
    for stream in listener.incoming() {
        let mut stream = stream?;
        let state = Arc::clone(&state);
        std::thread::spawn(move || loop {
            match read_frame(&mut stream) {
                Ok(Some((k, body))) => {
                    let (rk, reply) = handle(&state, k, &body);
                    if write_frame(&mut stream, rk, &reply).is_err() {
                        break;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    log::warn!("dropping connection: {e}");
                    break;
                }
            }
        });
    }
    Ok(())
}

fn reply<T>(r: Result<T>, ok: impl FnOnce(T) -> Vec<u8>) -> (u8, Vec<u8>) {
    match r {
        Ok(v) => (kind::OK, ok(v)),
        Err(e) => (kind::ERR, e.to_string().into_bytes()),
    }
}

/// Serves the master enclave to one orchestrator.
pub fn serve_enclave<S: Storage + 'static>(listener: TcpListener, master: MasterService<S>) -> Result<()> {
    serve(listener, Arc::new(Mutex::new(master)), |m, k, body| {
        let mut m = m.lock().unwrap();
        match k {
            kind::ATTEST => (kind::OK, to_bytes(&m.report().to_json())),
            kind::ENROLL => reply(parse(body).and_then(|v| Ok(EnrollmentMessage::from_json(&v)?)).and_then(|msg| m.enroll(&msg)), |_| Vec::new()),
            kind::RELAY => {
                let set = parse(body).and_then(|v| {
                    v.as_array()
                        .ok_or_else(|| ClusterError::Transport("relay body must be a list".into()))?
                        .iter()
                        .map(|c| Ok(SignedCommand::from_json(c)?))
                        .collect::<Result<Vec<_>>>()
                });
                reply(set.and_then(|s| m.execute(&s)), |r| to_bytes(&r.to_json()))
            }
            k => (kind::ERR, format!("unexpected request kind {k:#x}").into_bytes()),
        }
    })
}

/// Orchestrator-side connection to the enclave server.
pub struct EnclaveLink {
    stream: TcpStream,
}

impl EnclaveLink {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(EnclaveLink { stream: TcpStream::connect(addr)? })
    }

    fn attest(&mut self) -> Result<Vec<u8>> {
        expect_ok(call(&mut self.stream, kind::ATTEST, &[])?)
    }

    fn enroll(&mut self, body: &[u8]) -> Result<(u8, Vec<u8>)> {
        call(&mut self.stream, kind::ENROLL, body)
    }

    fn relay(&mut self, set: &[SignedCommand]) -> Result<Reply> {
        let body = to_bytes(&Value::Array(set.iter().map(SignedCommand::to_json).collect()));
        match call(&mut self.stream, kind::RELAY, &body)? {
            (kind::OK, b) => Ok(Reply::Response(SignedResponse::from_json(&parse(&b)?)?)),
            (kind::ERR, b) => Ok(Reply::Rejected(String::from_utf8_lossy(&b).into_owned())),
            (k, _) => Err(ClusterError::Transport(format!("unexpected reply kind {k:#x}"))),
        }
    }
}

fn reply_json(r: &Reply) -> Value {
    match r {
        Reply::Response(s) => json!({ "response": s.to_json() }),
        Reply::Rejected(m) => json!({ "rejected": m }),
    }
}

fn reply_from_json(v: &Value) -> Result<Reply> {
    if let Some(m) = v.get("rejected").and_then(Value::as_str) {
        return Ok(Reply::Rejected(m.to_string()));
    }
    let r = v.get("response").ok_or_else(|| ClusterError::Transport("reply without response".into()))?;
    Ok(Reply::Response(SignedResponse::from_json(r)?))
}

struct OrchestratorState {
    orchestrator: Orchestrator,
    enclave: EnclaveLink,
}

/// Serves clients; command sets are relayed one at a time.
pub fn serve_orchestrator(listener: TcpListener, orchestrator: Orchestrator, enclave: EnclaveLink) -> Result<()> {
    serve(listener, Arc::new(Mutex::new(OrchestratorState { orchestrator, enclave })), |s, k, body| {
        let mut s = s.lock().unwrap();
        match k {
            kind::ATTEST => reply(s.enclave.attest(), |b| b),
            kind::ENROLL => s.enclave.enroll(body).unwrap_or_else(|e| (kind::ERR, e.to_string().into_bytes())),
            kind::SUBMIT_COMMAND => {
                let seqn = parse(body).and_then(|v| Ok(SignedCommand::from_json(&v)?)).and_then(|c| s.orchestrator.submit(c));
                let relayed: Result<()> = (|| {
                    while let Some((seqn, set)) = s.orchestrator.dispatch() {
                        let r = s.enclave.relay(&set)?;
                        s.orchestrator.post(seqn, r);
                    }
                    Ok(())
                })();
                reply(seqn.and_then(|q| relayed.map(|_| q)), |q| to_bytes(&q.to_json()))
            }
            kind::FETCH_RESPONSE => match parse(body).and_then(|v| Ok(Seqn::from_json(&v)?)) {
                Ok(q) => match s.orchestrator.fetch(&q) {
                    Some(r) => (kind::OK, to_bytes(&reply_json(r))),
                    None => (kind::PENDING, Vec::new()),
                },
                Err(e) => (kind::ERR, e.to_string().into_bytes()),
            },
            k => (kind::ERR, format!("unexpected request kind {k:#x}").into_bytes()),
        }
    })
}

/// Client-side connection to an orchestrator server.
pub struct RemoteOrchestrator {
    stream: TcpStream,
}

impl RemoteOrchestrator {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(RemoteOrchestrator { stream: TcpStream::connect(addr)? })
    }
}

impl Endpoint for RemoteOrchestrator {
    fn attest(&mut self) -> Result<AttestationReport> {
        AttestationReport::from_json(&parse(&expect_ok(call(&mut self.stream, kind::ATTEST, &[])?)?)?)
    }

    fn enroll(&mut self, msg: &EnrollmentMessage) -> Result<()> {
        expect_ok(call(&mut self.stream, kind::ENROLL, &to_bytes(&msg.to_json()))?).map(|_| ())
    }

    fn submit(&mut self, cmd: SignedCommand) -> Result<Seqn> {
        let b = expect_ok(call(&mut self.stream, kind::SUBMIT_COMMAND, &to_bytes(&cmd.to_json()))?)?;
        Ok(Seqn::from_json(&parse(&b)?)?)
    }

    fn fetch(&mut self, seqn: &Seqn) -> Result<Option<Reply>> {
        match call(&mut self.stream, kind::FETCH_RESPONSE, &to_bytes(&seqn.to_json()))? {
            (kind::PENDING, _) => Ok(None),
            other => Ok(Some(reply_from_json(&parse(&expect_ok(other)?)?)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing() {
        let mut buf = Vec::new();
        write_frame(&mut buf, kind::RELAY, b"abc").unwrap();
        assert_eq!(&buf[..5], &[4, 0, 0, 0, kind::RELAY]);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some((kind::RELAY, b"abc".to_vec())));
        assert_eq!(read_frame(&mut r).unwrap(), None);
        assert!(read_frame(&mut &[0u8, 0, 0, 0][..]).is_err());
    }
}
