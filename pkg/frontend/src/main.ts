/** Console entry point: wires the bridge client, view model, and DOM. */

import { BridgeClient } from "./client.js";
import { ConsoleUI } from "./ui.js";
import { ViewModel } from "./viewmodel.js";

const DISPLAY_TAGS = [
  "plant.n_hpt",
  "plant.n_lpt",
  "plant.t_exh",
  "plant.p_oil",
  "plant.t_oil",
  "plant.main_pump",
  "plant.aux_pump",
  "plant.emerg_pump",
  "plant.cooler_fans",
  "plant.roof_fans",
  "plant.load_mode",
  "ctl.seq",
  "ctl.trip_cause",
  "ctl.fuel_cmd",
  "ctl.alarms",
];

const params = new URLSearchParams(location.search);
const url = params.get("bridge") ?? `ws://${location.hostname || "localhost"}:7118`;

const vm = new ViewModel([
  { tag: "plant.n_hpt" },
  { tag: "plant.n_lpt" },
  { tag: "plant.t_exh" },
]);

const client = new BridgeClient({
  url,
  tags: DISPLAY_TAGS,
  onStatus: (status) => vm.setStatus(status),
  onFrame: (frame, receivedAt) => {
    if (frame.verb === "DATA") {
      vm.applyData(frame, receivedAt);
    } else if (frame.verb === "NAK") {
      toast(`NAK ${frame.tag}: ${frame.reason}`);
    }
  },
});

function toast(message: string): void {
  const el = document.getElementById("toast");
  if (!el) return;
  el.textContent = message;
  el.className = "toast visible";
  setTimeout(() => {
    el.className = "toast";
  }, 4000);
}

const ui = new ConsoleUI(vm, {
  start: () => client.poke("cmd.start", 1),
  stop: () => client.poke("cmd.stop", 1),
  reset: () => client.poke("cmd.reset", 1),
  loadRing: () => client.poke("cmd.load", "ring"),
  loadTrunk: () => client.poke("cmd.load", "trunk"),
  unload: () => client.poke("cmd.load", "unload"),
  ack: () => {
    client.poke("cmd.ack_alarm", 1);
    vm.acknowledgeAll();
  },
  togglePause: () => vm.setPaused(!vm.paused),
});

client.start();

function frame(): void {
  ui.render(Date.now());
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
