//! Blocking JSON-over-HTTP client shared by the remote model adapters.

use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Connection settings for a remote model service.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpSettings {
    /// Base URL, e.g. `http://127.0.0.1:9000`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Delay before the first retry; doubled on each further retry.
    pub backoff: Duration,
}

impl HttpSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug)]
pub(crate) enum HttpFailure {
    Unavailable(String),
    Malformed(String),
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    settings: HttpSettings,
}

impl JsonClient {
    pub(crate) fn new(settings: HttpSettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, settings }
    }

    pub(crate) fn settings(&self) -> &HttpSettings {
        &self.settings
    }

    pub(crate) fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, HttpFailure> {
        let url = format!("{}{}", self.settings.endpoint.trim_end_matches('/'), path);
        let mut delay = self.settings.backoff;
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body) {
                Err(HttpFailure::Unavailable(reason)) if attempt < self.settings.retries => {
                    log::warn!("{url}: {reason}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, HttpFailure> {
        let mut response = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| HttpFailure::Unavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(HttpFailure::Unavailable(format!("HTTP {}", status.as_u16())));
        }
        response
            .body_mut()
            .read_json::<R>()
            .map_err(|e| HttpFailure::Malformed(e.to_string()))
    }

    /// True when a TCP connection to the endpoint's host can be opened.
    pub(crate) fn reachable(&self) -> bool {
        let Ok(uri) = self.settings.endpoint.parse::<ureq::http::Uri>() else {
            return false;
        };
        let Some(host) = uri.host() else {
            return false;
        };
        let port = uri.port_u16().unwrap_or(match uri.scheme_str() {
            Some("https") => 443,
            _ => 80,
        });
        let timeout = self.settings.timeout.min(Duration::from_secs(1));
        (host, port)
            .to_socket_addrs()
            .map(|mut addrs| addrs.any(|a| TcpStream::connect_timeout(&a, timeout).is_ok()))
            .unwrap_or(false)
    }
}
