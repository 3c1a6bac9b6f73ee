#pragma once

#include "dime/model.hpp"

#include <string>
#include <vector>

#include <sys/types.h>

namespace dime {

struct ExternalModelOptions {
    double handshake_timeout_seconds = 10.0;
    double response_timeout_seconds = 120.0;
    int max_pairs_per_request = 256;
};

// Runs a model as a child process speaking line-delimited JSON over
// stdin/stdout. The child announces itself with one handshake line
//   {"protocol":1,"classes":C,"modalities":[{"kind":"..."},{"kind":"..."}]}
// and then answers each request
//   {"id":k,"pairs":[[x1,x2],...]}
// with
//   {"id":k,"logits":[[C reals],...]}
// Ids must match; out-of-order responses are a protocol error. One request
// is in flight at a time; callers wanting parallelism open several
// sessions. A crashed or misbehaving child marks the session dead and all
// later calls fail fast.
class ExternalModelSession final : public Model {
public:
    explicit ExternalModelSession(std::string command, ExternalModelOptions options = {});
    ~ExternalModelSession() override;

    ExternalModelSession(const ExternalModelSession&) = delete;
    ExternalModelSession& operator=(const ExternalModelSession&) = delete;

    int num_classes() const override { return classes_; }
    const std::vector<ModalityValue::Kind>& modality_kinds() const { return kinds_; }
    bool alive() const noexcept { return alive_; }

    std::vector<LogitVector> evaluate_batch(const std::vector<ModalityPair>& pairs) override;

private:
    void spawn();
    void read_handshake();
    // Next line from the child, or throws GatewayError(at_index) on
    // crash/timeout.
    std::string read_line(double timeout_seconds, std::size_t at_index);
    void write_line(const std::string& line, std::size_t at_index);
    void shutdown() noexcept;

    std::string command_;
    ExternalModelOptions options_;
    int classes_ = 0;
    std::vector<ModalityValue::Kind> kinds_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::uint64_t next_id_ = 0;
    bool alive_ = false;
};

}  // namespace dime
