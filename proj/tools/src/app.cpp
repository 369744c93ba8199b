#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flatlab/app/app.hpp"

namespace flatlab::app {

namespace {

// "--a.b value" and "--a.b=value" pairs left over after the named options.
void apply_overrides(json& doc, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3)
      throw Error(ErrorKind::ConfigInvalid, "unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size())
        throw Error(ErrorKind::ConfigInvalid, "override '" + arg + "' needs a value");
      value = extras[++i];
    }
    apply_override(doc, key, value);
  }
}

}  // namespace

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"flatlab: curvature, flatness and flatness-deviation computations"};
  std::string command;
  std::string config_path;
  cli.add_option("command", command,
                 "curvature | verify | flatness | deviation | minimize | normal-metric | census")
      ->required();
  cli.add_option("--config", config_path, "JSON run configuration");
  cli.allow_extras();
  cli.footer("Any config value can be overridden as --section.key value, e.g. --quad.cells 64,64");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << cli.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "flatlab: " << e.what() << "\n";
    return kExitConfigInvalid;
  }

  try {
    json doc = config_path.empty() ? json::object() : load_config_file(config_path);
    if (!doc.is_object()) throw Error(ErrorKind::ConfigInvalid, "config must be a JSON object");
    if (doc.contains("command") && doc["command"] != command)
      throw Error(ErrorKind::ConfigInvalid, "config is for '" +
                                                doc["command"].get<std::string>() +
                                                "', not '" + command + "'");
    doc["command"] = command;
    apply_overrides(doc, cli.remaining());

    const RunConfig cfg = parse_config(doc);
    const Report report = run(cfg);
    const std::string text = report_to_json(report).dump(2) + "\n";
    if (!cfg.report_path.empty())
      write_text_file(cfg.report_path, text);
    else
      out << text;
    if (!cfg.table_path.empty()) write_text_file(cfg.table_path, report_table(report));

    int failed = 0;
    for (const Check& c : report.checks)
      if (!c.pass) {
        ++failed;
        err << "flatlab: check '" << c.name << "' failed: " << c.value << " "
            << to_string(c.relation) << " " << c.tolerance << " does not hold\n";
      }
    return failed == 0 ? kExitPass : kExitCheckFailed;
  } catch (const Error& e) {
    err << "flatlab: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "flatlab: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace flatlab::app
