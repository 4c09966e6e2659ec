//! Length-prefixed request/response protocol over TCP.
//!
//! A frame is a 4-byte big-endian length followed by that many bytes. A
//! request is two frames, a JSON header and the package text; a response
//! is one JSON frame. One request always yields exactly one response.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};

use crate::compute::ServerOps;
use crate::error::{Result, ServerError};
use crate::service::{QueryHit, Service, DEFAULT_K};

pub const MAX_FRAME: u32 = 1 << 30;

pub fn write_frame(w: &mut impl Write, bytes: &[u8]) -> io::Result<()> {
    let len = u32::try_from(bytes.len())
        .ok()
        .filter(|&n| n <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(bytes)?;
    w.flush()
}

/// `None` on a clean end of stream before a length prefix.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Ingest,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestHeader {
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    /// `"ok"` or `"error"`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default)]
    pub results: Vec<QueryHit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ops: Option<ServerOps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    fn failure(e: &ServerError) -> Self {
        Response {
            status: "error".into(),
            id: None,
            results: Vec::new(),
            ops: None,
            error: Some(WireError {
                kind: e.kind().into(),
                message: e.to_string(),
            }),
        }
    }

    fn into_result(self) -> Result<Self> {
        match (self.status.as_str(), &self.error) {
            ("ok", _) => Ok(self),
            (_, Some(e)) => Err(ServerError::Remote {
                kind: e.kind.clone(),
                message: e.message.clone(),
            }),
            (other, None) => Err(ServerError::Protocol(format!("status {other:?} without error"))),
        }
    }
}

#[derive(Debug, Default)]
pub struct WireCounters {
    pub connections: AtomicU64,
    pub requests: AtomicU64,
    pub responses: AtomicU64,
    pub ingest_requests: AtomicU64,
    pub query_requests: AtomicU64,
}

impl WireCounters {
    pub fn snapshot(&self) -> [u64; 5] {
        [
            &self.connections,
            &self.requests,
            &self.responses,
            &self.ingest_requests,
            &self.query_requests,
        ]
        .map(|c| c.load(Ordering::SeqCst))
    }
}

fn handle(service: &Service, counters: &WireCounters, header: &[u8], body: &[u8]) -> Response {
    let outcome = (|| -> Result<Response> {
        let header: RequestHeader =
            serde_json::from_slice(header).map_err(|e| ServerError::Protocol(format!("bad header: {e}")))?;
        let body = std::str::from_utf8(body).map_err(|_| ServerError::Protocol("package is not UTF-8".into()))?;
        match header.op {
            Op::Ingest => {
                counters.ingest_requests.fetch_add(1, Ordering::SeqCst);
                let receipt = service.ingest_text(body, header.label.as_deref().unwrap_or(""))?;
                Ok(Response {
                    status: "ok".into(),
                    id: Some(receipt.id),
                    results: Vec::new(),
                    ops: Some(receipt.ops),
                    error: None,
                })
            }
            Op::Query => {
                counters.query_requests.fetch_add(1, Ordering::SeqCst);
                let reply = service.query_text(body, header.k.unwrap_or(DEFAULT_K))?;
                Ok(Response {
                    status: "ok".into(),
                    id: None,
                    results: reply.results,
                    ops: Some(reply.ops),
                    error: None,
                })
            }
        }
    })();
    outcome.unwrap_or_else(|e| Response::failure(&e))
}

fn serve_connection(mut stream: TcpStream, service: &Service, counters: &WireCounters) -> io::Result<()> {
    loop {
        let Some(header) = read_frame(&mut stream)? else {
            return Ok(());
        };
        let body = read_frame(&mut stream)?
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "request without body"))?;
        counters.requests.fetch_add(1, Ordering::SeqCst);
        let response = handle(service, counters, &header, &body);
        let bytes = serde_json::to_vec(&response).expect("response serializes");
        counters.responses.fetch_add(1, Ordering::SeqCst);
        write_frame(&mut stream, &bytes)?;
    }
}

/// Running server; dropping the handle does not stop it, [`ServerHandle::shutdown`] does.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub counters: Arc<WireCounters>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the accept loop ends.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Accepts connections on `listener`, one thread per connection.
pub fn spawn(listener: TcpListener, service: Arc<Service>) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let counters = Arc::new(WireCounters::default());
    let stop = Arc::new(AtomicBool::new(false));
    let thread = {
        let (counters, stop) = (counters.clone(), stop.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                counters.connections.fetch_add(1, Ordering::SeqCst);
                let (service, counters) = (service.clone(), counters.clone());
                thread::spawn(move || {
                    if let Err(e) = serve_connection(stream, &service, &counters) {
                        eprintln!("connection error: {e}");
                    }
                });
            }
        })
    };
    Ok(ServerHandle {
        addr,
        counters,
        stop,
        thread: Some(thread),
    })
}

pub struct Client {
    stream: TcpStream,
    pub requests_sent: u64,
    pub responses_received: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Client {
            stream: TcpStream::connect(addr)?,
            requests_sent: 0,
            responses_received: 0,
        })
    }

    fn call(&mut self, header: &RequestHeader, package_text: &str) -> Result<Response> {
        let header = serde_json::to_vec(header).expect("header serializes");
        write_frame(&mut self.stream, &header)?;
        write_frame(&mut self.stream, package_text.as_bytes())?;
        self.requests_sent += 1;
        let bytes = read_frame(&mut self.stream)?
            .ok_or_else(|| ServerError::Protocol("connection closed before response".into()))?;
        self.responses_received += 1;
        let response: Response =
            serde_json::from_slice(&bytes).map_err(|e| ServerError::Protocol(format!("bad response: {e}")))?;
        response.into_result()
    }

    pub fn ingest(&mut self, package_text: &str, label: &str) -> Result<Response> {
        self.call(
            &RequestHeader {
                op: Op::Ingest,
                k: None,
                label: Some(label.to_owned()),
            },
            package_text,
        )
    }

    pub fn query(&mut self, package_text: &str, k: usize) -> Result<Response> {
        self.call(
            &RequestHeader {
                op: Op::Query,
                k: Some(k),
                label: None,
            },
            package_text,
        )
    }
}
