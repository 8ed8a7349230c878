/** Entry point: reads service base, task id, and annotator id from URL
 * parameters and mounts the annotation session. */

import { ServiceClient } from "./api.js";
import { AnnotationSession } from "./ui.js";

function configError(root: HTMLElement, message: string): void {
  root.innerHTML = "";
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.textContent = message;
  root.append(banner);
}

export function mount(root: HTMLElement, location: Location = window.location): void {
  const params = new URLSearchParams(location.search);
  const taskId = params.get("task");
  const annotator = params.get("annotator");
  const base = params.get("api") ?? location.origin;
  if (!taskId || !annotator) {
    configError(root, "Missing URL parameters: ?task=<task_id>&annotator=<your_id>[&api=<service base>]");
    return;
  }
  const session = new AnnotationSession(root, new ServiceClient(base), {
    taskId,
    annotator,
  });
  void session.start();
}

const root = document.getElementById("app");
if (root) {
  mount(root);
}
