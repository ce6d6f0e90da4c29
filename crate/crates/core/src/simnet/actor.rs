use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::frame::{ErrorCode, Frame, FrameError, FrameType};
use crate::error::Error;
use crate::schemes::{scheme_for, Query};
use crate::store::MessageStore;

/// One database. Holds its replica of the store and nothing else: no
/// per-client state and no handle on any other database.
#[derive(Debug, Clone)]
pub struct DatabaseActor {
    db_index: usize,
    store: Arc<MessageStore>,
}

impl DatabaseActor {
    pub fn new(db_index: usize, store: Arc<MessageStore>) -> Self {
        DatabaseActor { db_index, store }
    }

    pub fn db_index(&self) -> usize {
        self.db_index
    }

    /// Reply to one inbound frame.
    pub fn handle(&self, frame: &Frame) -> Frame {
        match frame.kind {
            FrameType::Query => self.handle_query(&frame.payload),
            _ => Frame::error(ErrorCode::UnexpectedFrame, "databases only accept QUERY frames"),
        }
    }

    fn handle_query(&self, payload: &[u8]) -> Frame {
        let query = match Query::from_bytes(payload) {
            Ok(q) => q,
            Err(e) => return Frame::error(ErrorCode::BadQuery, &e.to_string()),
        };
        if query.db_index != self.db_index {
            return Frame::error(
                ErrorCode::WrongRecipient,
                &format!("query addressed to database {}, this is database {}", query.db_index, self.db_index),
            );
        }
        let p = query.params;
        if p.field != self.store.field() || p.k != self.store.k() {
            return Frame::error(
                ErrorCode::ParamsMismatch,
                &format!(
                    "query expects k={} over {}, store holds k={} over {}",
                    p.k,
                    p.field,
                    self.store.k(),
                    self.store.field()
                ),
            );
        }
        let scheme = match scheme_for(p) {
            Ok(s) => s,
            Err(e) => return Frame::error(ErrorCode::BadQuery, &e.to_string()),
        };
        match scheme.answer(&self.store, &query) {
            Ok(a) => Frame::answer(a.to_bytes()),
            Err(e @ Error::Shape(_)) => Frame::error(ErrorCode::ParamsMismatch, &e.to_string()),
            Err(e) => Frame::error(ErrorCode::BadQuery, &e.to_string()),
        }
    }

    /// Serves frames on one connection until the peer closes it. A framing
    /// violation gets an ERROR reply and ends the connection.
    pub fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            match Frame::read_from(&mut reader) {
                Ok(None) => return Ok(()),
                Ok(Some(frame)) => self.handle(&frame).write_to(&mut writer)?,
                Err(FrameError::Io(e)) => return Err(e),
                Err(e) => {
                    Frame::error(e.code(), &e.to_string()).write_to(&mut writer)?;
                    return Ok(());
                }
            }
        }
    }

    /// Binds `addr` and serves connections on background threads.
    pub fn spawn(self, addr: impl ToSocketAddrs) -> io::Result<ServerHandle> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let actor = Arc::new(self);
        let join = thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let actor = Arc::clone(&actor);
                thread::spawn(move || {
                    let _ = actor.serve_connection(stream);
                });
            }
        });
        Ok(ServerHandle { local_addr, stop, join: Some(join) })
    }

    /// Serves forever on the calling thread.
    pub fn serve(self, listener: TcpListener) -> io::Result<()> {
        let actor = Arc::new(self);
        for conn in listener.incoming() {
            let stream = conn?;
            let actor = Arc::clone(&actor);
            thread::spawn(move || {
                let _ = actor.serve_connection(stream);
            });
        }
        Ok(())
    }
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn endpoint(&self) -> String {
        self.local_addr.to_string()
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.local_addr);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.join.is_some() {
            self.stop_now();
        }
    }
}
