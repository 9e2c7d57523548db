"""
Pull a snapshot from a Prometheus-compatible HTTP API.

A tiny in-process server answers instant queries here; point
``fetch_snapshot`` at a real endpoint to do the same against a cluster
running node_exporter plus a ping-mesh exporter.
"""

import json
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from netsched.telemetry import QueryConfig, fetch_snapshot

NODES = ["node-1", "node-2", "node-3"]
cfg = QueryConfig()

SERIES = {
    cfg.cpu_load1: [({"node": n}, 0.5 * i) for i, n in enumerate(NODES)],
    cfg.mem_available_bytes: [({"node": n}, 4e9) for n in NODES],
    cfg.tx_bps: [({"node": n}, 1e5 * (i + 1)) for i, n in enumerate(NODES)],
    cfg.rx_bps: [({"node": n}, 2e5) for n in NODES],
    cfg.rtt_s: [({"source": a, "target": b}, 0.004 if a[-1] < "3" and b[-1] < "3" else 0.03)
                for a in NODES for b in NODES if a != b],
}


class Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        query = urllib.parse.parse_qs(urllib.parse.urlparse(self.path).query)["query"][0]
        result = [{"metric": labels, "value": [0, str(v)]} for labels, v in SERIES.get(query, [])]
        body = json.dumps({"status": "success", "data": {"resultType": "vector", "result": result}})
        self.send_response(200)
        self.end_headers()
        self.wfile.write(body.encode())

    def log_message(self, *args):
        pass


# %%
server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_port}"

snap = fetch_snapshot(url)
for name, tel in snap.nodes.items():
    print(name, tel.rtt_to_peers, tel.cpu_load)

server.shutdown()
