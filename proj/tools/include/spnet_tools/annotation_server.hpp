#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "spnet/dataset.hpp"

namespace spnet::tools {

enum class AnnotationState { Unlabeled, Labeled, NoSingularPoint };

const char* state_name(AnnotationState s);

struct AnnotationRecord {
  std::string id;        // file stem, or the full file name when stems collide
  std::string filename;  // relative to images/
  AnnotationState state = AnnotationState::Unlabeled;
  std::optional<data::Point> point;
};

// Local HTTP service over one dataset directory:
//
//   GET /api/images           -> [{id, filename, state, x?, y?}, ...]
//   GET /api/image/{id}       -> image bytes
//   PUT /api/annotation/{id}  <- {"x": .., "y": ..} or {"none": true}
//   GET /                     -> UI from ui_dir, or a built-in fallback page
//
// The image list is fixed when the server starts. Each PUT rewrites
// ground_truth.csv atomically; if the file changed on disk since the session
// last read or wrote it the PUT fails with 409 and the session reloads it.
class AnnotationServer {
 public:
  AnnotationServer(std::filesystem::path dataset_dir, std::filesystem::path ui_dir = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Blocks until stop(). Binds 127.0.0.1 only.
  bool listen(int port);
  // Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_to_any_port();
  bool listen_after_bind();
  void stop();
  bool is_running() const;

  std::size_t image_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spnet::tools
