//! Loopback listener standing in for every remote endpoint.

use std::io::Read;
use std::net::TcpListener;
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

/// Accepts and counts TCP connections until dropped.
pub struct Sniffer {
    port: u16,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl Sniffer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let port = listener.local_addr().unwrap().port();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (h, s) = (hits.clone(), stop.clone());
        std::thread::spawn(move || {
            while !s.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((mut conn, _)) => {
                        h.fetch_add(1, Ordering::SeqCst);
                        let _ = conn.set_read_timeout(Some(Duration::from_millis(50)));
                        let _ = conn.read(&mut [0u8; 1024]);
                    }
                    Err(_) => std::thread::sleep(Duration::from_millis(2)),
                }
            }
        });
        Sniffer { port, hits, stop }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Config and environment that route every provider and proxy to the
    /// sniffer.
    pub fn route(&self, cmd: &mut Command, config: &Path) {
        let url = self.url();
        std::fs::write(
            config,
            format!(
                "request_timeout_secs = 2\n[oracle]\nbase_url = \"{url}\"\n[images]\nbase_url = \"{url}\"\n\
                 [embeddings]\nbase_url = \"{url}\"\n[sentiment]\nurl = \"{url}/sentiment\"\n"
            ),
        )
        .unwrap();
        cmd.arg("--config").arg(config);
        cmd.env("KNOWLEDGE_BASE_URL", &url).env("ORACLE_API_KEY", "test-key");
        for proxy in [
            "HTTP_PROXY",
            "HTTPS_PROXY",
            "ALL_PROXY",
            "http_proxy",
            "https_proxy",
            "all_proxy",
        ] {
            cmd.env(proxy, &url);
        }
        cmd.env_remove("NO_PROXY").env_remove("no_proxy");
    }

    pub fn hits(&self) -> usize {
        std::thread::sleep(Duration::from_millis(100));
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for Sniffer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}
