import { PlayApp } from "./ui/app";
import "./style.css";

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get("server") ?? "http://127.0.0.1:8023";
const checkpointId = params.get("checkpoint") ?? "default";

const app = new PlayApp({ serverUrl, checkpointId });

const picker = document.createElement("input");
picker.type = "file";
picker.accept = "image/png";
picker.addEventListener("change", () => {
  const file = picker.files?.[0];
  if (!file) {
    return;
  }
  const reader = new FileReader();
  reader.onload = () => {
    const b64 = String(reader.result).split(",", 2)[1];
    void app.boot(b64);
  };
  reader.readAsDataURL(file);
});
document.body.appendChild(picker);
