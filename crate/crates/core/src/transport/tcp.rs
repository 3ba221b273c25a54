//! TCP links. A reader thread per link drains the socket into a channel so
//! large simultaneous sends cannot deadlock on kernel buffers.

use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::channel;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::frame::{Frame, HEADER_LEN};
use super::inproc::ChannelLink;
use super::Link;
use crate::error::{Error, Result};

pub struct TcpLink {
    stream: TcpStream,
    inner: ChannelLink,
}

impl TcpLink {
    fn spawn(stream: TcpStream) -> Result<TcpLink> {
        stream.set_nodelay(true)?;
        let mut reader = stream.try_clone()?;
        let (tx, rx) = channel();
        thread::spawn(move || loop {
            let mut header = [0u8; HEADER_LEN];
            if reader.read_exact(&mut header).is_err() {
                break;
            }
            let len = match Frame::decode_header(&header) {
                Ok((_, len)) => len,
                Err(e) => {
                    warn!("dropping link after bad header: {e}");
                    break;
                }
            };
            let mut frame = header.to_vec();
            frame.resize(HEADER_LEN + len, 0);
            if reader.read_exact(&mut frame[HEADER_LEN..]).is_err() {
                break;
            }
            if tx.send(frame).is_err() {
                break;
            }
        });
        Ok(TcpLink { stream, inner: ChannelLink::from_parts(None, rx) })
    }
}

impl Link for TcpLink {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        self.stream
            .write_all(&frame)
            .map_err(|e| Error::Connection(format!("send failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>> {
        self.inner.recv(timeout)
    }

    fn peer_closed(&mut self) -> bool {
        self.inner.peer_closed()
    }

    fn close(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

/// Connects party `me` to every other party. Lower-numbered parties listen,
/// higher-numbered parties dial, and each dialer announces itself with a
/// one-byte id followed by the session id.
pub fn connect(
    me: usize,
    addrs: &[SocketAddr; 3],
    session: [u8; 16],
    timeout: Duration,
) -> Result<[Option<TcpLink>; 3]> {
    let deadline = Instant::now() + timeout;
    let mut links: [Option<TcpLink>; 3] = Default::default();
    let listener = if me < 2 {
        let l = TcpListener::bind(addrs[me])
            .map_err(|e| Error::Connection(format!("bind {}: {e}", addrs[me])))?;
        l.set_nonblocking(true)?;
        Some(l)
    } else {
        None
    };

    for (j, addr) in addrs.iter().enumerate().take(me) {
        let stream = loop {
            match TcpStream::connect_timeout(addr, Duration::from_millis(500)) {
                Ok(s) => break s,
                Err(e) if Instant::now() < deadline => {
                    debug!("P{me} waiting for P{j} at {addr}: {e}");
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => {
                    return Err(Error::Connection(format!("P{j} at {addr} unreachable: {e}")))
                }
            }
        };
        let mut s = stream;
        let mut hello = vec![me as u8];
        hello.extend_from_slice(&session);
        s.write_all(&hello)?;
        links[j] = Some(TcpLink::spawn(s)?);
    }

    if let Some(listener) = listener {
        let mut missing = 2 - me;
        while missing > 0 {
            match listener.accept() {
                Ok((mut s, _)) => {
                    s.set_nonblocking(false)?;
                    s.set_read_timeout(Some(Duration::from_secs(5)))?;
                    let mut hello = [0u8; 17];
                    s.read_exact(&mut hello)?;
                    s.set_read_timeout(None)?;
                    let peer = hello[0] as usize;
                    if peer <= me || peer > 2 || links[peer].is_some() {
                        return Err(Error::Connection(format!("unexpected hello from P{peer}")));
                    }
                    if hello[1..] != session {
                        return Err(Error::Desync(format!("P{peer} joined another session")));
                    }
                    links[peer] = Some(TcpLink::spawn(s)?);
                    missing -= 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Connection(format!(
                            "timed out waiting for {missing} peer(s) to dial P{me}"
                        )));
                    }
                    thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(links)
}
