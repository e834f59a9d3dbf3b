"""Serve price suggestions over HTTP.

Trains a small model, starts the service on an ephemeral port and sends
a few requests: an ordinary listing, one from an unseen seller, and one
with the wrong number of visual features.
"""

import http.client
import json
import threading

from gatedprice import data
from gatedprice.service import make_server
from gatedprice.synth import SynthConfig, generate
from gatedprice.trainer import TrainConfig, train
from gatedprice.types import ObjectiveConfig

corpus = generate(SynthConfig(n=5000, d_v=16, seed=1))
table = data.trim_outliers(corpus.table, 0.05)
index = data.build_stat_index(table)
ckpt = train(data.assemble(table, index), TrainConfig(ObjectiveConfig.percentile(0.5)), stat_index=index).checkpoint

server = make_server(ckpt, "127.0.0.1", 0)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]


def call(method, path, body=None):
    conn = http.client.HTTPConnection(host, port)
    conn.request(method, path, body=None if body is None else json.dumps(body),
                 headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    out = resp.status, json.loads(resp.read())
    conn.close()
    return out


print("health:", call("GET", "/v1/health"))
row = table.take([0])
listing = {"visual_features": row.visual_features[0].tolist(), "category_id": int(row.category_id[0]),
           "seller_id": row.seller_id[0]}
print("listing:", call("POST", "/v1/price", listing), "sold for", float(row.sold_price[0]))
print("unseen seller:", call("POST", "/v1/price", {**listing, "seller_id": "brand-new"}))
print("wrong width:", call("POST", "/v1/price", {**listing, "visual_features": [0.0] * 3}))
server.shutdown()
server.server_close()
