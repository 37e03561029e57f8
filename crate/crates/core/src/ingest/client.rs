//! REST client for Bugzilla-style bug trackers.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{BugRecord, RawBugRecords};

/// Endpoint used when `BUGCAST_ENDPOINT` is unset.
const FALLBACK_ENDPOINT: &str = "https://bugzilla.mozilla.org/rest";

/// Transient failures are retried this many times before giving up.
const MAX_ATTEMPTS: u32 = 3;

/// How much of an unparseable payload is preserved in the error.
const EXCERPT_LEN: usize = 200;

/// Resolves the tracker endpoint, honouring the `BUGCAST_ENDPOINT` override.
pub fn default_endpoint() -> String {
    std::env::var("BUGCAST_ENDPOINT").unwrap_or_else(|_| FALLBACK_ENDPOINT.to_string())
}

/// One page of the tracker's `/bug` response.
#[derive(Debug, Deserialize)]
struct BugsPage {
    bugs: Vec<WireBug>,
}

/// One bug as serialised on the wire.
#[derive(Debug, Deserialize)]
struct WireBug {
    id: u64,
    creation_time: DateTime<Utc>,
    #[serde(default)]
    cf_last_resolved: Option<DateTime<Utc>>,
}

/// Fetches all bugs created in `[start, end)` from a tracker endpoint.
///
/// Pagination walks `offset` in steps of `page_size` until a short page
/// arrives. Results are filtered to the half-open creation range on the
/// client side, deduplicated by id (overlapping pages) and sorted. Responses
/// are cached on disk keyed by endpoint and range, so a repeated fetch with
/// identical arguments performs no network requests; set `BUGCAST_CACHE_DIR`
/// to move the cache away from the system temp directory.
///
/// An empty range (`start == end`) yields an empty collection without
/// touching the network. Each page is retried up to three times with a short
/// backoff before the fetch fails.
pub fn fetch_bug_counts(
    endpoint: &str,
    date_range: (NaiveDate, NaiveDate),
    page_size: usize,
) -> Result<RawBugRecords> {
    fetch_bug_counts_with_cache(endpoint, date_range, page_size, &default_cache_dir())
}

/// [`fetch_bug_counts`] with an explicit cache directory.
pub fn fetch_bug_counts_with_cache(
    endpoint: &str,
    date_range: (NaiveDate, NaiveDate),
    page_size: usize,
    cache_dir: &Path,
) -> Result<RawBugRecords> {
    let (start, end) = date_range;
    if start > end {
        return Err(Error::InvalidRange(format!(
            "fetch range ends ({end}) before it starts ({start})"
        )));
    }
    if page_size == 0 {
        return Err(Error::InvalidSpec("page size must be at least 1".into()));
    }
    if start == end {
        return Ok(RawBugRecords::default());
    }

    let cache_file = cache_path(cache_dir, endpoint, start, end);
    if let Some(cached) = read_cache(&cache_file) {
        log::info!("cache hit for {start}..{end} ({} records)", cached.len());
        return Ok(cached);
    }

    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| Error::Network {
            attempts: 0,
            detail: format!("failed to construct HTTP client: {e}"),
        })?;

    let url = format!("{}/bug", endpoint.trim_end_matches('/'));
    let mut wire: Vec<WireBug> = Vec::new();
    let mut offset = 0usize;
    loop {
        let query = [
            ("creation_time".to_string(), start.to_string()),
            (
                "include_fields".to_string(),
                "id,creation_time,cf_last_resolved".to_string(),
            ),
            ("limit".to_string(), page_size.to_string()),
            ("offset".to_string(), offset.to_string()),
        ];
        let body = get_with_retry(&client, &url, &query)?;
        let page: BugsPage = serde_json::from_str(&body).map_err(|e| {
            Error::MalformedResponse {
                detail: format!("could not parse bug page at offset {offset}: {e}"),
                excerpt: excerpt(&body),
            }
        })?;
        let page_len = page.bugs.len();
        wire.extend(page.bugs);
        if page_len < page_size {
            break;
        }
        offset += page_len;
    }

    let records: Vec<BugRecord> = wire
        .into_iter()
        .filter(|bug| {
            let created = bug.creation_time.date_naive();
            created >= start && created < end
        })
        .map(|bug| BugRecord {
            bug_id: bug.id,
            creation_time: bug.creation_time,
            resolution_time: bug.cf_last_resolved,
        })
        .collect();
    let records = RawBugRecords::new(records)?;
    write_cache(&cache_file, &records);
    Ok(records)
}

/// Issues one GET with retries, returning the response body on success.
fn get_with_retry(
    client: &reqwest::blocking::Client,
    url: &str,
    query: &[(String, String)],
) -> Result<String> {
    let mut detail = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        match client.get(url).query(query).send() {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    match response.text() {
                        Ok(body) => return Ok(body),
                        Err(e) => detail = format!("failed reading body: {e}"),
                    }
                } else {
                    detail = format!("server answered HTTP {status}");
                }
            }
            Err(e) => detail = e.to_string(),
        }
        if attempt < MAX_ATTEMPTS {
            std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
        }
    }
    Err(Error::Network {
        attempts: MAX_ATTEMPTS,
        detail,
    })
}

fn excerpt(body: &str) -> String {
    let mut cut = EXCERPT_LEN.min(body.len());
    while !body.is_char_boundary(cut) {
        cut -= 1;
    }
    body[..cut].to_string()
}

fn default_cache_dir() -> PathBuf {
    match std::env::var_os("BUGCAST_CACHE_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => std::env::temp_dir().join("bugcast-cache"),
    }
}

fn cache_path(dir: &Path, endpoint: &str, start: NaiveDate, end: NaiveDate) -> PathBuf {
    let digest = Sha256::digest(format!("{endpoint}|{start}|{end}").as_bytes());
    dir.join(format!("{digest:x}.json"))
}

fn read_cache(path: &Path) -> Option<RawBugRecords> {
    let body = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str(&body) {
        Ok(records) => Some(records),
        Err(e) => {
            // A corrupt cache entry is not fatal; refetch over the network.
            log::warn!("ignoring unreadable cache file {}: {e}", path.display());
            None
        }
    }
}

fn write_cache(path: &Path, records: &RawBugRecords) {
    let write = || -> std::io::Result<()> {
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir)?;
        let body = serde_json::to_string(records).expect("records serialise");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, path)
    };
    if let Err(e) = write() {
        // Caching is best-effort; the fetched data is still returned.
        log::warn!("could not cache fetch results at {}: {e}", path.display());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::io::{Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    /// Serves canned responses for `/bug` requests on a local port.
    ///
    /// Each connection carries exactly one request; the response closes the
    /// connection so the client opens a fresh one per page.
    struct MockTracker {
        endpoint: String,
        requests: Arc<AtomicUsize>,
        handle: Option<std::thread::JoinHandle<()>>,
    }

    impl MockTracker {
        fn serve<F>(respond: F) -> Self
        where
            F: Fn(&HashMap<String, String>) -> String + Send + 'static,
        {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = listener.local_addr().unwrap();
            let requests = Arc::new(AtomicUsize::new(0));
            let seen = Arc::clone(&requests);
            let handle = std::thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(mut stream) = stream else { break };
                    let Some(query) = read_request(&mut stream) else {
                        break;
                    };
                    if query.get("shutdown").is_some() {
                        let _ = write_response(&mut stream, "{}");
                        break;
                    }
                    seen.fetch_add(1, Ordering::SeqCst);
                    let body = respond(&query);
                    let _ = write_response(&mut stream, &body);
                }
            });
            Self {
                endpoint: format!("http://{addr}"),
                requests,
                handle: Some(handle),
            }
        }

        fn request_count(&self) -> usize {
            self.requests.load(Ordering::SeqCst)
        }
    }

    impl Drop for MockTracker {
        fn drop(&mut self) {
            // Wake the accept loop with a shutdown request.
            let url = format!("{}/bug?shutdown=1", self.endpoint);
            let _ = reqwest::blocking::get(url);
            if let Some(handle) = self.handle.take() {
                let _ = handle.join();
            }
        }
    }

    /// Reads one HTTP request and returns its parsed query string.
    fn read_request(stream: &mut TcpStream) -> Option<HashMap<String, String>> {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 1024];
        while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
            let n = stream.read(&mut chunk).ok()?;
            if n == 0 {
                return None;
            }
            buf.extend_from_slice(&chunk[..n]);
        }
        let text = String::from_utf8_lossy(&buf);
        let request_line = text.lines().next()?;
        let target = request_line.split_whitespace().nth(1)?;
        let query = target.split_once('?').map(|(_, q)| q).unwrap_or("");
        let mut parsed = HashMap::new();
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
            parsed.insert(key.to_string(), value.to_string());
        }
        Some(parsed)
    }

    fn write_response(stream: &mut TcpStream, body: &str) -> std::io::Result<()> {
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(response.as_bytes())
    }

    fn wire_bug(id: u64, created: &str) -> String {
        format!(r#"{{"id":{id},"creation_time":"{created}","cf_last_resolved":null}}"#)
    }

    /// Five bugs served in scrambled order; ids 1-4 fall inside March 2015,
    /// id 90 falls outside and must be filtered client-side.
    fn fixture() -> Vec<String> {
        vec![
            wire_bug(4, "2015-03-20T04:00:00Z"),
            wire_bug(1, "2015-03-02T10:00:00Z"),
            wire_bug(90, "2015-04-01T00:00:00Z"),
            wire_bug(3, "2015-03-15T22:00:00Z"),
            wire_bug(2, "2015-03-09T12:00:00Z"),
        ]
    }

    fn fixture_page(query: &HashMap<String, String>) -> String {
        let all = fixture();
        let limit: usize = query["limit"].parse().unwrap();
        let offset: usize = query["offset"].parse().unwrap();
        let page: Vec<String> = all
            .into_iter()
            .skip(offset)
            .take(limit)
            .collect();
        format!(r#"{{"bugs":[{}]}}"#, page.join(","))
    }

    #[test]
    fn paginates_filters_and_sorts() {
        let tracker = MockTracker::serve(fixture_page);
        let cache = tempfile::tempdir().unwrap();
        let records = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 4, 1)),
            2,
            cache.path(),
        )
        .unwrap();
        // Five fixture rows at page size two means three requests.
        assert_eq!(tracker.request_count(), 3);
        let ids: Vec<u64> = records.records().iter().map(|r| r.bug_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn second_fetch_is_served_from_the_cache() {
        let tracker = MockTracker::serve(fixture_page);
        let cache = tempfile::tempdir().unwrap();
        let range = (date(2015, 3, 1), date(2015, 4, 1));
        let cold =
            fetch_bug_counts_with_cache(&tracker.endpoint, range, 10, cache.path()).unwrap();
        let after_cold = tracker.request_count();
        assert!(after_cold > 0);
        let warm =
            fetch_bug_counts_with_cache(&tracker.endpoint, range, 10, cache.path()).unwrap();
        assert_eq!(tracker.request_count(), after_cold);
        assert_eq!(cold, warm);
    }

    #[test]
    fn different_ranges_use_different_cache_entries() {
        let tracker = MockTracker::serve(fixture_page);
        let cache = tempfile::tempdir().unwrap();
        let first = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 4, 1)),
            10,
            cache.path(),
        )
        .unwrap();
        let narrower = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 3, 10)),
            10,
            cache.path(),
        )
        .unwrap();
        assert_eq!(first.len(), 4);
        assert_eq!(narrower.len(), 2);
    }

    #[test]
    fn empty_range_returns_no_records_without_network() {
        let tracker = MockTracker::serve(fixture_page);
        let cache = tempfile::tempdir().unwrap();
        let records = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 3, 1)),
            10,
            cache.path(),
        )
        .unwrap();
        assert!(records.is_empty());
        assert_eq!(tracker.request_count(), 0);
    }

    #[test]
    fn reversed_range_is_rejected() {
        let cache = tempfile::tempdir().unwrap();
        let err = fetch_bug_counts_with_cache(
            "http://127.0.0.1:1",
            (date(2015, 4, 1), date(2015, 3, 1)),
            10,
            cache.path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidRange(_)));
    }

    #[test]
    fn unreachable_endpoint_reports_exhausted_attempts() {
        // Bind a port, then drop the listener so connections are refused.
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let cache = tempfile::tempdir().unwrap();
        let err = fetch_bug_counts_with_cache(
            &format!("http://{addr}"),
            (date(2015, 3, 1), date(2015, 4, 1)),
            10,
            cache.path(),
        )
        .unwrap_err();
        match err {
            Error::Network { attempts, .. } => assert_eq!(attempts, MAX_ATTEMPTS),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn unparseable_payload_is_reported_with_an_excerpt() {
        let tracker = MockTracker::serve(|_| "<html>maintenance window</html>".to_string());
        let cache = tempfile::tempdir().unwrap();
        let err = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 4, 1)),
            10,
            cache.path(),
        )
        .unwrap_err();
        match err {
            Error::MalformedResponse { excerpt, .. } => {
                assert!(excerpt.contains("maintenance"), "{excerpt}");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn resolution_times_survive_the_wire_format() {
        let tracker = MockTracker::serve(|_| {
            r#"{"bugs":[{"id":8,"creation_time":"2015-03-02T10:00:00Z","cf_last_resolved":"2015-03-05T09:30:00Z"}]}"#
                .to_string()
        });
        let cache = tempfile::tempdir().unwrap();
        let records = fetch_bug_counts_with_cache(
            &tracker.endpoint,
            (date(2015, 3, 1), date(2015, 4, 1)),
            10,
            cache.path(),
        )
        .unwrap();
        let record = &records.records()[0];
        assert_eq!(record.bug_id, 8);
        let resolved = record.resolution_time.unwrap();
        assert_eq!(resolved.date_naive(), date(2015, 3, 5));
    }
}
