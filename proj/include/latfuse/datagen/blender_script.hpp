#pragma once

#include <sstream>
#include <string>

#include "latfuse/core/error.hpp"
#include "latfuse/datagen/scene.hpp"

namespace latfuse::datagen {

inline constexpr int kBlenderResolution = 4096;

namespace detail {

inline std::string py_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline void validate_for_emit(const SceneSpec& s) {
  if (s.planes.size() < 2) throw ValueError("scene needs at least one subject and a background");
  if (!s.planes.back().background) throw ValueError("last plane must be the background");
  if (!(s.f_stop > 0.0) || !(s.focal_length_mm > 0.0) || !(s.sensor_width_mm > 0.0))
    throw ValueError("camera parameters must be positive");
  for (const auto& p : s.planes)
    if (!(p.distance > 0.0) || !(p.scale > 0.0)) throw ValueError("plane distance and scale must be positive");
}

}  // namespace detail

/// Standalone Blender (bpy) script that builds the scene and renders one
/// image per plane focus plus a depth-of-field-off ground truth.
///
/// The script reads textures from $LATFUSE_ASSETS (catalog layout:
/// subjects/<id>.png, backgrounds/<id>.png, hdri/<hdr_id>.exr) and writes to
/// $LATFUSE_OUTPUT. Output depends only on the scene, byte for byte.
inline std::string emit_blender_script(const SceneSpec& s) {
  detail::validate_for_emit(s);
  const auto num = format_number;
  std::ostringstream py;
  py << "# Focus-stack scene, seed " << s.seed << "\n"
     << "import math\nimport os\n\nimport bpy\n\n"
     << "ASSET_ROOT = os.environ.get(\"LATFUSE_ASSETS\", \"assets\")\n"
     << "OUTPUT_DIR = os.environ.get(\"LATFUSE_OUTPUT\", \"render\")\n"
     << "F_STOP = " << num(s.f_stop) << "\n"
     << "FOCAL_LENGTH_MM = " << num(s.focal_length_mm) << "\n"
     << "SENSOR_WIDTH_MM = " << num(s.sensor_width_mm) << "\n"
     << "RESOLUTION = (" << kBlenderResolution << ", " << kBlenderResolution << ")\n"
     << "HDR_ID = " << detail::py_string(s.hdr_id) << "\n"
     << "# (texture id, is_background, distance m, scale, rotation deg, centre x, centre y)\n"
     << "PLANES = [\n";
  for (const auto& p : s.planes)
    py << "    (" << detail::py_string(p.texture_id) << ", " << (p.background ? "True" : "False") << ", "
       << num(p.distance) << ", " << num(p.scale) << ", " << num(p.rotation_deg) << ", " << num(p.position[0])
       << ", " << num(p.position[1]) << "),\n";
  py << "]\n\n";
  py << R"PY(bpy.ops.wm.read_factory_settings(use_empty=True)
scene = bpy.context.scene
scene.render.engine = "CYCLES"
scene.render.resolution_x, scene.render.resolution_y = RESOLUTION
scene.render.resolution_percentage = 100
scene.render.image_settings.file_format = "PNG"

cam_data = bpy.data.cameras.new("Camera")
cam_data.lens = FOCAL_LENGTH_MM
cam_data.sensor_fit = "HORIZONTAL"
cam_data.sensor_width = SENSOR_WIDTH_MM
cam_data.dof.use_dof = True
cam_data.dof.aperture_fstop = F_STOP
cam = bpy.data.objects.new("Camera", cam_data)
scene.collection.objects.link(cam)
scene.camera = cam
cam.location = (0.0, 0.0, 0.0)
cam.rotation_euler = (0.0, 0.0, 0.0)  # looks down -Z

world = bpy.data.worlds.new("World")
scene.world = world
world.use_nodes = True
env = world.node_tree.nodes.new("ShaderNodeTexEnvironment")
env.image = bpy.data.images.load(os.path.join(ASSET_ROOT, "hdri", HDR_ID + ".exr"))
world.node_tree.links.new(env.outputs["Color"], world.node_tree.nodes["Background"].inputs["Color"])


def textured_material(name, path):
    mat = bpy.data.materials.new(name)
    mat.use_nodes = True
    mat.blend_method = "BLEND"
    mat.shadow_method = "NONE"
    nodes, links = mat.node_tree.nodes, mat.node_tree.links
    bsdf = nodes["Principled BSDF"]
    tex = nodes.new("ShaderNodeTexImage")
    tex.image = bpy.data.images.load(path)
    links.new(tex.outputs["Color"], bsdf.inputs["Base Color"])
    links.new(tex.outputs["Alpha"], bsdf.inputs["Alpha"])
    return mat, tex.image


frame_per_metre = SENSOR_WIDTH_MM / FOCAL_LENGTH_MM
for index, (tex_id, is_background, distance, scale, rotation, cx, cy) in enumerate(PLANES):
    folder = "backgrounds" if is_background else "subjects"
    mat, image = textured_material("mat_%d" % index, os.path.join(ASSET_ROOT, folder, tex_id + ".png"))
    frame = distance * frame_per_metre
    if is_background:
        width = height = frame * 1.02  # fill the field of view
        x = y = 0.0
    else:
        height = scale * frame
        width = height * image.size[0] / max(image.size[1], 1)
        x, y = (cx - 0.5) * frame, (0.5 - cy) * frame
    bpy.ops.mesh.primitive_plane_add(size=1.0, location=(x, y, -distance))
    plane = bpy.context.active_object
    plane.name = "plane_%d" % index
    plane.scale = (width, height, 1.0)
    plane.rotation_euler = (0.0, 0.0, math.radians(-rotation))
    plane.data.materials.append(mat)
    plane.visible_shadow = False

os.makedirs(OUTPUT_DIR, exist_ok=True)
for index, plane in enumerate(PLANES):
    cam_data.dof.focus_distance = plane[2]
    scene.render.filepath = os.path.join(OUTPUT_DIR, "stack_%d.png" % index)
    bpy.ops.render.render(write_still=True)

cam_data.dof.use_dof = False
scene.render.filepath = os.path.join(OUTPUT_DIR, "gt.png")
bpy.ops.render.render(write_still=True)
)PY";
  return py.str();
}

}  // namespace latfuse::datagen
