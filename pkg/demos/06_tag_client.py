#!/usr/bin/env python3
"""Talking to a live simulator over the tag protocol.

Start the simulator first:

    gtcusim serve --scenario scenarios/cold_start_ring.yaml --speed 10

then run this script.  It subscribes to the shaft speeds, pushes the
start button, and watches the sequencer walk through the start steps.
The same frames work over the WebSocket bridge (port 7118) for a
browser client.
"""

import sys
import time

from gtcusim.tagbus import Message, TagBusClient, Verb

HOST, PORT = "127.0.0.1", 7117

try:
    client = TagBusClient(HOST, PORT, timeout=10.0)
except OSError:
    sys.exit("no simulator on 127.0.0.1:7117; start `gtcusim serve` first")

with client:
    seq = client.request("ctl.seq")
    print(f"sequencer state: {seq.value}")

    for tag in ("plant.n_hpt", "ctl.seq"):
        reply = client.advise(tag)
        print(f"advise {tag}: {reply.verb.name}")

    print("pressing start...")
    reply = client.poke("cmd.start", 1)
    print(f"poke cmd.start -> {reply.verb.name}")

    print("watching the bus for 15 s:")
    seen_seq = None
    deadline = time.monotonic() + 15.0
    shown = 0
    while time.monotonic() < deadline:
        msg = client.recv()
        if msg.verb is not Verb.DATA:
            continue
        if msg.tag == "ctl.seq" and msg.value != seen_seq:
            seen_seq = msg.value
            print(f"  t={msg.timestamp / 1000:8.2f}s sequencer -> {msg.value}")
        elif msg.tag == "plant.n_hpt":
            shown += 1
            if shown % 100 == 0:
                print(f"  t={msg.timestamp / 1000:8.2f}s n_hpt = {msg.value:.1f} rpm")
