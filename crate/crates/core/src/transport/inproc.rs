//! In-process links over channels.

use std::collections::VecDeque;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::time::Duration;

use super::Link;
use crate::error::{Error, Result};

pub struct ChannelLink {
    tx: Option<Sender<Vec<u8>>>,
    rx: Receiver<Vec<u8>>,
    pending: VecDeque<Vec<u8>>,
    closed: bool,
}

impl ChannelLink {
    pub fn pair() -> (ChannelLink, ChannelLink) {
        let (a_tx, a_rx) = channel();
        let (b_tx, b_rx) = channel();
        (
            ChannelLink { tx: Some(a_tx), rx: b_rx, pending: VecDeque::new(), closed: false },
            ChannelLink { tx: Some(b_tx), rx: a_rx, pending: VecDeque::new(), closed: false },
        )
    }

    pub(crate) fn from_parts(tx: Option<Sender<Vec<u8>>>, rx: Receiver<Vec<u8>>) -> Self {
        ChannelLink { tx, rx, pending: VecDeque::new(), closed: false }
    }
}

impl Link for ChannelLink {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        match &self.tx {
            Some(tx) => tx.send(frame).map_err(|_| Error::Connection("peer hung up".into())),
            None => Err(Error::Connection("link closed".into())),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>> {
        if let Some(f) = self.pending.pop_front() {
            return Ok(Some(f));
        }
        match self.rx.recv_timeout(timeout) {
            Ok(f) => Ok(Some(f)),
            Err(RecvTimeoutError::Disconnected) => {
                self.closed = true;
                Ok(None)
            }
            Err(RecvTimeoutError::Timeout) => {
                Err(Error::Desync(format!("no frame within {timeout:?}")))
            }
        }
    }

    fn peer_closed(&mut self) -> bool {
        loop {
            match self.rx.try_recv() {
                Ok(f) => self.pending.push_back(f),
                Err(TryRecvError::Empty) => return self.closed,
                Err(TryRecvError::Disconnected) => {
                    self.closed = true;
                    return true;
                }
            }
        }
    }

    fn close(&mut self) {
        self.tx = None;
    }
}

/// Three fully connected channel endpoints, indexed by party.
pub fn mesh() -> [[Option<ChannelLink>; 3]; 3] {
    let mut out: [[Option<ChannelLink>; 3]; 3] = Default::default();
    for i in 0..3 {
        for j in i + 1..3 {
            let (a, b) = ChannelLink::pair();
            out[i][j] = Some(a);
            out[j][i] = Some(b);
        }
    }
    out
}
