#Imports the tests for the toolkit. Test modules are collected by pytest from App/tests.
