/**
 * three.js rendering of the streamed surface mesh: one indexed
 * BufferGeometry built from the topology, updated in place per frame.
 */

import * as THREE from "three";

import { FrameMessage, TopologyMessage } from "./protocol.js";

export class MeshView {
  readonly geometry: THREE.BufferGeometry;
  readonly mesh: THREE.Mesh;

  constructor(topology: TopologyMessage) {
    this.geometry = new THREE.BufferGeometry();
    this.geometry.setIndex(topology.triangles.flat());
    this.geometry.setAttribute(
      "position",
      new THREE.BufferAttribute(Float32Array.from(topology.rest_positions), 3),
    );
    this.geometry.computeVertexNormals();
    const material = new THREE.MeshStandardMaterial({
      color: 0x8fb4d9,
      flatShading: true,
      side: THREE.DoubleSide,
    });
    this.mesh = new THREE.Mesh(this.geometry, material);
  }

  update(frame: FrameMessage): void {
    const attr = this.geometry.getAttribute("position") as THREE.BufferAttribute;
    (attr.array as Float32Array).set(frame.positions);
    attr.needsUpdate = true;
    this.geometry.computeVertexNormals();
    this.geometry.computeBoundingSphere();
  }
}

export function makeScene(view: MeshView): THREE.Scene {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x10141a);
  scene.add(new THREE.AmbientLight(0xffffff, 0.5));
  const key = new THREE.DirectionalLight(0xffffff, 1.2);
  key.position.set(30, -40, 60);
  scene.add(key);
  scene.add(view.mesh);
  return scene;
}

export function frameCamera(topology: TopologyMessage, aspect: number): THREE.PerspectiveCamera {
  const pts = topology.rest_positions;
  const center = new THREE.Vector3();
  let radius = 1;
  const box = new THREE.Box3();
  for (let i = 0; i < pts.length; i += 3) {
    box.expandByPoint(new THREE.Vector3(pts[i], pts[i + 1], pts[i + 2]));
  }
  box.getCenter(center);
  radius = Math.max(box.getSize(new THREE.Vector3()).length() / 2, 1);
  const camera = new THREE.PerspectiveCamera(45, aspect, radius / 100, radius * 100);
  camera.position.copy(center).add(new THREE.Vector3(2.2 * radius, -2.2 * radius, 1.4 * radius));
  camera.lookAt(center);
  return camera;
}
