#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "rtexec/model.hpp"

namespace rtexec {

class SystemParseError : public std::runtime_error {
public:
    explicit SystemParseError(const std::string& what) : std::runtime_error(what) {}
};

// System description file: JSON with top-level keys `topics`, `groups`,
// `nodes`. Field names mirror the model types; durations are *_ns integers.
SystemDescription load_system(std::istream& in);
SystemDescription load_system_file(const std::string& path);
std::string system_to_json(const SystemDescription& desc, int indent = 2);
void save_system_file(const SystemDescription& desc, const std::string& path);

// SchedAttr fragment of the same schema, reused by benchmark configs.
std::string sched_attr_to_json(const SchedAttr& attr);
SchedAttr sched_attr_from_json(const std::string& json_text);

}  // namespace rtexec
